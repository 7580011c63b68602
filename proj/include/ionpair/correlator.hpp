#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ionpair/clickstream.hpp"

namespace ionpair {

enum class Normalization { RawCounts, RateNormalized };

struct CorrelogramConfig {
  std::int64_t bin_width_ps = 1000;
  std::int64_t window_ps = 100000;  // half-width; integer multiple of the bin width
  Normalization mode = Normalization::RateNormalized;
  TagFilter filter_a;
  TagFilter filter_b;

  void validate() const;
  std::int64_t half_bins() const { return window_ps / bin_width_ps; }
};

/// Bins are centered on multiples of the bin width, k = -K..K with K = window/bin:
/// bin k holds delays t_b - t_a in [k w - w/2, k w + w/2). A delay on an edge goes to
/// the higher bin.
struct Correlogram {
  std::vector<double> tau_ps;  // bin centers
  std::vector<std::uint64_t> counts;
  std::vector<double> normalized;
  std::uint64_t total_pairs = 0;
  std::int64_t overlap_ps = 0;
  double rate_a = 0.0;  // per second, inside the overlap window
  double rate_b = 0.0;
  bool empty = false;  // one side had no events
  // Leave-one-block-out histograms from conditioned_g2_jackknife, same layout as
  // `normalized` (raw pair counts in RawCounts mode).
  std::vector<std::vector<double>> jackknife;

  std::uint64_t at(std::int64_t k) const { return counts[static_cast<std::size_t>(k + half())]; }
  std::int64_t half() const { return static_cast<std::int64_t>(counts.size() / 2); }
};

/// Bin index in [-K, K] of a delay, or nothing if it falls outside the histogram.
std::optional<std::int64_t> delay_bin(std::int64_t delay_ps, std::int64_t bin_width_ps, std::int64_t half_bins);

/// Sorted-merge correlation of two streams, O(N_a + N_b + pairs). Passing the same
/// object twice computes the autocorrelation and drops the zero-lag self pairs. The
/// cfg filters are NOT applied here; see conditioned_g2_estimate.
/// Work is split into `shards` time blocks of a; counts do not depend on the shard count.
Correlogram correlate(const ClickStream& a, const ClickStream& b, const CorrelogramConfig& cfg, unsigned shards = 1);

/// Applies cfg.filter_a / cfg.filter_b and then correlates. When a and b are the same
/// stream, an event matching both filters is never paired with itself.
Correlogram conditioned_g2_estimate(const ClickStream& a, const ClickStream& b, const CorrelogramConfig& cfg,
                                    unsigned shards = 1);

/// conditioned_g2_estimate plus `blocks` jackknife replicas. The overlap window is cut
/// into equal time blocks; a pair belongs to the block of its first event. Replica k
/// drops block k from the pair counts, the event counts and the duration.
Correlogram conditioned_g2_jackknife(const ClickStream& a, const ClickStream& b, const CorrelogramConfig& cfg,
                                     std::size_t blocks, unsigned shards = 1);

}  // namespace ionpair
