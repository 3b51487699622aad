#pragma once

#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <optional>
#include <vector>

#include "gfm/common/thread_pool.hpp"
#include "gfm/store/chunk_store.hpp"

namespace gfm::store {

struct LoaderConfig {
  std::size_t batch_size = 8;
  std::size_t workers = 1;
  std::size_t prefetch = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Batch {
  std::size_t epoch = 0;
  std::size_t index = 0;
  std::vector<std::size_t> sample_ids;
  std::vector<raster::RasterChip> samples;
};

/// Block-shuffled visiting order for one epoch: chunk order is permuted, then
/// samples are shuffled within each batch-sized window. A batch therefore
/// touches about batch_size / chunk_samples chunks. Pure function of its
/// arguments.
std::vector<std::size_t> epoch_order(std::size_t sample_count, std::size_t chunk_samples,
                                     std::size_t batch_size, std::uint64_t seed,
                                     std::size_t epoch);

/// Streams floor(N / batch_size) batches for one epoch. Chunk decoding runs on
/// a worker pool; up to `prefetch` batches are loaded ahead of the consumer.
/// Batch contents depend only on (seed, epoch, batch index). Errors from
/// background loads surface from next().
class BatchIterator {
 public:
  BatchIterator(ChunkStore store, LoaderConfig config, std::size_t epoch = 0);
  ~BatchIterator();

  BatchIterator(const BatchIterator&) = delete;
  BatchIterator& operator=(const BatchIterator&) = delete;

  std::optional<Batch> next();
  std::size_t batches_per_epoch() const { return batches_; }
  std::size_t batches_in_flight() const { return pending_.size(); }

 private:
  Batch load(std::size_t batch_index);
  void launch_until(std::size_t limit);

  ChunkStore store_;
  LoaderConfig config_;
  std::size_t epoch_;
  std::size_t batches_;
  std::vector<std::size_t> order_;
  std::unique_ptr<ThreadPool> pool_;
  std::deque<std::future<Batch>> pending_;
  std::size_t next_to_launch_ = 0;
  std::size_t next_to_return_ = 0;
};

}  // namespace gfm::store
