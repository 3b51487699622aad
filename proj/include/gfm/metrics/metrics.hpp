#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace gfm::metrics {

// K x K pixel counts; rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  // Skips pixels whose ground truth equals ignore_label. Other labels must be
  // in [0, K); violations raise LabelError naming the flat position.
  void accumulate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth,
                  int ignore_label = 255);
  void merge(const ConfusionMatrix& other);

  std::size_t classes() const { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
  std::uint64_t total() const;
  std::uint64_t ignored() const { return ignored_; }

  std::uint64_t tp(std::size_t c) const { return at(c, c); }
  std::uint64_t fp(std::size_t c) const;
  std::uint64_t fn(std::size_t c) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

struct ClassScores {
  // Empty for classes absent from both truth and prediction.
  std::optional<double> iou, f1, acc;
};

struct MetricsReport {
  std::vector<ClassScores> per_class;
  double miou = 0.0, mf1 = 0.0, macc = 0.0;
  double overall_accuracy = 0.0;
  std::optional<double> rmse, mae, ssim;
  std::uint64_t pixels = 0;
  std::uint64_t ignored = 0;
  std::uint64_t samples = 0;
  std::string config_hash;

  nlohmann::json to_json() const;
  // One row per class: class,accuracy,iou,f1.
  std::string to_csv() const;
};

// Per-class and mean scores; means skip classes with zero union.
MetricsReport summarize(const ConfusionMatrix& cm);

struct ErrorPair {
  double rmse = 0.0;
  double mae = 0.0;
};

// Errors over elements whose mask entry is nonzero.
ErrorPair masked_rmse_mae(std::span<const float> pred, std::span<const float> target,
                          std::span<const std::uint8_t> mask);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  // Non-positive means max - min of the second (target) image.
  double data_range = 0.0;
};

// Mean SSIM over every window position fully inside an h x w band.
double ssim(std::span<const double> a, std::span<const double> b, std::size_t h, std::size_t w,
            const SsimOptions& opts = {});

// Band-averaged SSIM of two (bands, h, w) stacks.
double ssim_bands(std::span<const double> a, std::span<const double> b, std::size_t bands,
                  std::size_t h, std::size_t w, const SsimOptions& opts = {});

std::vector<double> gaussian_window(std::size_t size, double sigma);

}  // namespace gfm::metrics
