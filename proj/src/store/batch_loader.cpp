#include "gfm/store/batch_loader.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "gfm/common/error.hpp"
#include "gfm/common/rng.hpp"

namespace gfm::store {

void LoaderConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (workers < 1) throw ArgumentError("workers must be >= 1");
}

std::vector<std::size_t> epoch_order(std::size_t sample_count, std::size_t chunk_samples,
                                     std::size_t batch_size, std::uint64_t seed,
                                     std::size_t epoch) {
  const std::size_t chunks = (sample_count + chunk_samples - 1) / chunk_samples;
  std::vector<std::size_t> chunk_order(chunks);
  std::iota(chunk_order.begin(), chunk_order.end(), 0);
  Rng rng(derive_seed(seed, 0xE90C, epoch));
  rng.shuffle(chunk_order);
  std::vector<std::size_t> order;
  order.reserve(sample_count);
  for (std::size_t c : chunk_order) {
    for (std::size_t i = c * chunk_samples; i < std::min(sample_count, (c + 1) * chunk_samples); ++i) {
      order.push_back(i);
    }
  }
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Rng window_rng(derive_seed(seed, 0xB10C, epoch, start / batch_size));
    window_rng.shuffle(std::span(order).subspan(start, end - start));
  }
  return order;
}

BatchIterator::BatchIterator(ChunkStore store, LoaderConfig config, std::size_t epoch)
    : store_(std::move(store)), config_(config), epoch_(epoch) {
  config_.validate();
  const auto& m = store_.manifest();
  if (config_.batch_size > m.sample_count) {
    throw ArgumentError("batch_size " + std::to_string(config_.batch_size) + " exceeds " +
                        std::to_string(m.sample_count) + " samples");
  }
  batches_ = m.sample_count / config_.batch_size;
  order_ = epoch_order(m.sample_count, m.chunk_samples, config_.batch_size, config_.seed, epoch_);
  pool_ = std::make_unique<ThreadPool>(config_.workers);
}

BatchIterator::~BatchIterator() {
  for (auto& f : pending_) {
    if (f.valid()) f.wait();
  }
}

Batch BatchIterator::load(std::size_t batch_index) {
  Batch batch;
  batch.epoch = epoch_;
  batch.index = batch_index;
  const auto first = order_.begin() + static_cast<std::ptrdiff_t>(batch_index * config_.batch_size);
  batch.sample_ids.assign(first, first + static_cast<std::ptrdiff_t>(config_.batch_size));

  // Group batch positions by chunk so every chunk file is opened once.
  std::map<std::size_t, std::vector<std::size_t>> by_chunk;
  const std::size_t k = store_.manifest().chunk_samples;
  for (std::size_t pos = 0; pos < batch.sample_ids.size(); ++pos) {
    by_chunk[batch.sample_ids[pos] / k].push_back(pos);
  }
  std::vector<std::optional<raster::RasterChip>> slots(batch.sample_ids.size());
  std::vector<std::future<void>> jobs;
  for (const auto& [chunk, positions] : by_chunk) {
    jobs.push_back(pool_->submit([this, &slots, &batch, chunk = chunk, &positions] {
      const auto bytes = store_.read_chunk(chunk);
      for (std::size_t pos : positions) {
        slots[pos].emplace(store_.sample_from_chunk(batch.sample_ids[pos], bytes));
      }
    }));
  }
  // Wait for all before rethrowing so no job outlives `slots`.
  for (auto& j : jobs) j.wait();
  for (auto& j : jobs) j.get();
  batch.samples.reserve(slots.size());
  for (auto& s : slots) batch.samples.push_back(std::move(*s));
  return batch;
}

void BatchIterator::launch_until(std::size_t limit) {
  while (next_to_launch_ < std::min(limit, batches_)) {
    const std::size_t b = next_to_launch_++;
    pending_.push_back(std::async(std::launch::async, [this, b] { return load(b); }));
  }
}

std::optional<Batch> BatchIterator::next() {
  if (next_to_return_ >= batches_) return std::nullopt;
  // The current batch plus `prefetch` batches ahead of it.
  launch_until(next_to_return_ + 1 + config_.prefetch);
  auto fut = std::move(pending_.front());
  pending_.pop_front();
  ++next_to_return_;
  Batch batch = fut.get();
  launch_until(next_to_return_ + config_.prefetch);
  return batch;
}

}  // namespace gfm::store
