#include "gfm/finetune/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <numeric>
#include <sstream>

#include "gfm/common/error.hpp"
#include "gfm/common/rng.hpp"
#include "gfm/common/thread_pool.hpp"

namespace gfm::finetune {

std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ArgumentError("sweep fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (k < 1) {
    throw ArgumentError("fraction " + std::to_string(fraction) + " of " + std::to_string(n) +
                        " samples leaves none to train on");
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x535542));
  rng.shuffle(all);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<SweepRow> run_data_efficiency_sweep(const SegData& train, const SegData& val,
                                                std::span<const double> fractions,
                                                std::span<const std::uint64_t> seeds,
                                                const ModelFactory& make_model,
                                                const SegTrainConfig& cfg, std::size_t workers) {
  cfg.validate();
  if (val.size() == 0) throw EmptyInputError("sweep needs a validation split");
  for (double f : fractions) subsample_indices(train.size(), f, 0);

  auto run = [&](double fraction, std::uint64_t seed) {
    const auto idx = subsample_indices(train.size(), fraction, seed);
    const SegData part = train.subset(idx);
    SegModel<float> model = make_model(seed);
    SegTrainConfig c = cfg;
    c.seed = derive_seed(cfg.seed, seed);
    train_segmentation(model, part, {}, c);
    const auto report = metrics::summarize(evaluate_seg(model, val));
    return std::vector<SweepRow>{{fraction, std::to_string(seed), "mIoU", report.miou},
                                 {fraction, std::to_string(seed), "mF1", report.mf1},
                                 {fraction, std::to_string(seed), "train_samples",
                                  static_cast<double>(idx.size())}};
  };

  std::vector<std::future<std::vector<SweepRow>>> futures;
  ThreadPool pool(std::max<std::size_t>(1, workers));
  for (double f : fractions) {
    for (auto s : seeds) futures.push_back(pool.submit([&run, f, s] { return run(f, s); }));
  }
  std::vector<SweepRow> rows;
  for (auto& fut : futures) {
    auto part = fut.get();
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

std::vector<SweepRow> with_summary(std::vector<SweepRow> rows) {
  std::map<std::pair<double, std::string>, std::vector<double>> groups;
  std::vector<std::pair<double, std::string>> order;
  for (const auto& r : rows) {
    if (r.seed == "mean" || r.seed == "std") continue;
    auto key = std::make_pair(r.fraction, r.metric);
    if (!groups.contains(key)) order.push_back(key);
    groups[key].push_back(r.value);
  }
  for (const auto& key : order) {
    const auto& v = groups[key];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    rows.push_back({key.first, "mean", key.second, mean});
    rows.push_back({key.first, "std", key.second, std::sqrt(var)});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os.precision(10);
  os << "fraction,seed,metric,value\n";
  for (const auto& r : rows) os << r.fraction << ',' << r.seed << ',' << r.metric << ',' << r.value << '\n';
  return os.str();
}

}  // namespace gfm::finetune
