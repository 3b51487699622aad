#include "gfm/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gfm/common/error.hpp"

namespace gfm::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {
  if (classes < 1) throw ArgumentError("confusion matrix needs at least one class");
}

void ConfusionMatrix::accumulate(std::span<const std::uint8_t> pred,
                                 std::span<const std::uint8_t> truth, int ignore_label) {
  if (pred.size() != truth.size()) {
    throw ShapeError("confusion matrix: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " labels");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (static_cast<int>(truth[i]) == ignore_label) {
      ++ignored_;
      continue;
    }
    if (truth[i] >= k_ || pred[i] >= k_) {
      throw LabelError("label out of range at position " + std::to_string(i) + ": truth " +
                       std::to_string(truth[i]) + ", prediction " + std::to_string(pred[i]) +
                       " with " + std::to_string(k_) + " classes");
    }
    ++counts_[truth[i] * k_ + pred[i]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw ShapeError("cannot merge confusion matrices of different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  ignored_ += other.ignored_;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::fp(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < k_; ++t) {
    if (t != c) s += at(t, c);
  }
  return s;
}

std::uint64_t ConfusionMatrix::fn(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < k_; ++p) {
    if (p != c) s += at(c, p);
  }
  return s;
}

MetricsReport summarize(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw EmptyInputError("no evaluated pixels");
  MetricsReport r;
  r.pixels = total;
  r.ignored = cm.ignored();
  double siou = 0.0, sf1 = 0.0, sacc = 0.0;
  std::size_t scored = 0;
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const double tp = static_cast<double>(cm.tp(c));
    const double fp = static_cast<double>(cm.fp(c));
    const double fn = static_cast<double>(cm.fn(c));
    correct += cm.tp(c);
    ClassScores s;
    if (tp + fp + fn > 0) {
      s.iou = tp / (tp + fp + fn);
      s.f1 = 2.0 * tp / (2.0 * tp + fp + fn);
      s.acc = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      siou += *s.iou;
      sf1 += *s.f1;
      sacc += *s.acc;
      ++scored;
    }
    r.per_class.push_back(s);
  }
  r.miou = siou / static_cast<double>(scored);
  r.mf1 = sf1 / static_cast<double>(scored);
  r.macc = sacc / static_cast<double>(scored);
  r.overall_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << *v;
  return os.str();
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    classes.push_back({{"class", c},
                       {"iou", opt(per_class[c].iou)},
                       {"f1", opt(per_class[c].f1)},
                       {"acc", opt(per_class[c].acc)}});
  }
  return {{"per_class", classes},   {"mIoU", miou},         {"mF1", mf1},
          {"mAcc", macc},           {"overall_accuracy", overall_accuracy},
          {"rmse", opt(rmse)},      {"mae", opt(mae)},      {"ssim", opt(ssim)},
          {"pixels", pixels},       {"ignored", ignored},   {"samples", samples},
          {"config_hash", config_hash}};
}

std::string MetricsReport::to_csv() const {
  std::string out = "class,accuracy,iou,f1\n";
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    out += std::to_string(c) + "," + fmt(per_class[c].acc) + "," + fmt(per_class[c].iou) + "," +
           fmt(per_class[c].f1) + "\n";
  }
  return out;
}

ErrorPair masked_rmse_mae(std::span<const float> pred, std::span<const float> target,
                          std::span<const std::uint8_t> mask) {
  if (pred.size() != target.size() || mask.size() != pred.size()) {
    throw ShapeError("masked_rmse_mae: prediction, target and mask sizes differ");
  }
  double sq = 0.0, abs = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sq += d * d;
    abs += std::abs(d);
    ++n;
  }
  if (n == 0) throw EmptyInputError("masked_rmse_mae: mask selects no pixels");
  return {std::sqrt(sq / static_cast<double>(n)), abs / static_cast<double>(n)};
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0) throw ArgumentError("gaussian window size must be odd");
  if (!(sigma > 0.0)) throw ArgumentError("gaussian sigma must be positive");
  const double half = static_cast<double>(size / 2);
  std::vector<double> g1(size);
  double s = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - half;
    g1[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += g1[i];
  }
  for (auto& v : g1) v /= s;
  std::vector<double> g(size * size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) g[y * size + x] = g1[y] * g1[x];
  }
  return g;
}

double ssim(std::span<const double> a, std::span<const double> b, std::size_t h, std::size_t w,
            const SsimOptions& opts) {
  if (a.size() != h * w || b.size() != h * w) throw ShapeError("ssim: image sizes differ");
  const std::size_t k = opts.window;
  if (h < k || w < k) {
    throw ArgumentError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                        " is smaller than the " + std::to_string(k) + "px window");
  }
  double range = opts.data_range;
  if (!(range > 0.0)) {
    const auto [lo, hi] = std::minmax_element(b.begin(), b.end());
    range = *hi - *lo;
    if (!(range > 0.0)) throw ArgumentError("ssim: constant target needs an explicit data_range");
  }
  const double c1 = (opts.k1 * range) * (opts.k1 * range);
  const double c2 = (opts.k2 * range) * (opts.k2 * range);
  const auto g = gaussian_window(k, opts.sigma);

  double sum = 0.0;
  for (std::size_t y = 0; y + k <= h; ++y) {
    for (std::size_t x = 0; x + k <= w; ++x) {
      double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (std::size_t dy = 0; dy < k; ++dy) {
        const double* ra = a.data() + (y + dy) * w + x;
        const double* rb = b.data() + (y + dy) * w + x;
        const double* gw = g.data() + dy * k;
        for (std::size_t dx = 0; dx < k; ++dx) {
          ma += gw[dx] * ra[dx];
          mb += gw[dx] * rb[dx];
          saa += gw[dx] * (ra[dx] * ra[dx]);
          sbb += gw[dx] * (rb[dx] * rb[dx]);
          sab += gw[dx] * (ra[dx] * rb[dx]);
        }
      }
      const double va = saa - ma * ma;
      const double vb = sbb - mb * mb;
      const double cov = sab - ma * mb;
      const double num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
      const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
      sum += num / den;
    }
  }
  return sum / static_cast<double>((h - k + 1) * (w - k + 1));
}

double ssim_bands(std::span<const double> a, std::span<const double> b, std::size_t bands,
                  std::size_t h, std::size_t w, const SsimOptions& opts) {
  if (bands == 0) throw ArgumentError("ssim: no bands");
  if (a.size() != bands * h * w || b.size() != a.size()) throw ShapeError("ssim: stack sizes differ");
  double s = 0.0;
  const std::size_t plane = h * w;
  for (std::size_t c = 0; c < bands; ++c) {
    s += ssim(a.subspan(c * plane, plane), b.subspan(c * plane, plane), h, w, opts);
  }
  return s / static_cast<double>(bands);
}

}  // namespace gfm::metrics
