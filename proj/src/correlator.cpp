#include "ionpair/correlator.hpp"

#include <algorithm>
#include <future>
#include <stdexcept>

namespace ionpair {

void CorrelogramConfig::validate() const {
  if (bin_width_ps <= 0) throw std::invalid_argument("bin width must be > 0");
  if (window_ps <= 0 || window_ps % bin_width_ps != 0)
    throw std::invalid_argument("window must be a positive integer multiple of the bin width");
}

std::optional<std::int64_t> delay_bin(std::int64_t delay_ps, std::int64_t bin_width_ps, std::int64_t half_bins) {
  // floor((2d + w) / 2w) in integers
  const std::int64_t num = 2 * delay_ps + bin_width_ps;
  const std::int64_t den = 2 * bin_width_ps;
  std::int64_t k = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --k;
  if (k < -half_bins || k > half_bins) return std::nullopt;
  return k;
}

namespace {

struct Span {
  const PhotonEvent* e;
  std::size_t size;
};

void check_sorted(const ClickStream& s) {
  if (!s.is_sorted()) throw std::invalid_argument("click stream is not sorted by timestamp");
}

// Counts pairs for a[lo, hi) against all of b.
void accumulate(Span a, std::size_t lo, std::size_t hi, Span b, bool self, const CorrelogramConfig& cfg,
                std::vector<std::uint64_t>& counts) {
  const std::int64_t w = cfg.bin_width_ps, K = cfg.half_bins();
  // Histogram covers delays in [-K w - w/2, K w + w/2). Shifting by that lower edge
  // makes the bin index floor((2d + (2K + 1) w) / 2w) with a non-negative numerator.
  const std::int64_t reach = K * w + w / 2 + 1;
  const std::uint64_t shift = static_cast<std::uint64_t>((2 * K + 1) * w), den = static_cast<std::uint64_t>(2 * w);
  const std::uint64_t n_bins = static_cast<std::uint64_t>(2 * K + 1);
  if (lo >= hi) return;
  std::size_t start = static_cast<std::size_t>(
      std::lower_bound(b.e, b.e + b.size, a.e[lo].t_ps - reach,
                       [](const PhotonEvent& x, std::int64_t t) { return x.t_ps < t; }) -
      b.e);
  std::uint64_t* c = counts.data();
  for (std::size_t i = lo; i < hi; ++i) {
    const std::int64_t ta = a.e[i].t_ps;
    while (start < b.size && b.e[start].t_ps < ta - reach) ++start;
    for (std::size_t j = start; j < b.size; ++j) {
      const std::int64_t d = b.e[j].t_ps - ta;
      if (d > reach) break;
      const std::uint64_t num = static_cast<std::uint64_t>(2 * d) + shift;  // wraps for delays below the range
      const std::uint64_t k = num / den;
      if (k < n_bins && !(self && j == i)) ++c[k];
    }
  }
}

Correlogram correlate_spans(Span a, Span b, bool self, std::int64_t overlap, const CorrelogramConfig& cfg,
                            std::int64_t count_a, std::int64_t count_b, unsigned shards) {
  const std::int64_t K = cfg.half_bins();
  const auto n_bins = static_cast<std::size_t>(2 * K + 1);
  Correlogram out;
  out.tau_ps.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k)
    out.tau_ps[k] = static_cast<double>((static_cast<std::int64_t>(k) - K) * cfg.bin_width_ps);
  out.counts.assign(n_bins, 0);
  out.normalized.assign(n_bins, 0.0);
  out.overlap_ps = overlap;

  if (a.size == 0 || b.size == 0 || overlap <= 0) {
    out.empty = true;
    return out;
  }

  shards = std::max(1u, std::min<unsigned>(shards, static_cast<unsigned>(a.size)));
  if (shards == 1) {
    accumulate(a, 0, a.size, b, self, cfg, out.counts);
  } else {
    std::vector<std::future<std::vector<std::uint64_t>>> parts;
    for (unsigned s = 0; s < shards; ++s) {
      const std::size_t lo = a.size * s / shards, hi = a.size * (s + 1) / shards;
      parts.push_back(std::async(std::launch::async, [=, &cfg] {
        std::vector<std::uint64_t> c(n_bins, 0);
        accumulate(a, lo, hi, b, self, cfg, c);
        return c;
      }));
    }
    for (auto& p : parts) {
      const auto c = p.get();
      for (std::size_t k = 0; k < n_bins; ++k) out.counts[k] += c[k];
    }
  }

  for (auto c : out.counts) out.total_pairs += c;
  const double T = static_cast<double>(overlap);
  const double ra = static_cast<double>(count_a) / T, rb = static_cast<double>(count_b) / T;  // per ps
  out.rate_a = ra * 1e12;
  out.rate_b = rb * 1e12;
  for (std::size_t k = 0; k < n_bins; ++k) {
    if (cfg.mode == Normalization::RawCounts) {
      out.normalized[k] = static_cast<double>(out.counts[k]);
    } else {
      const double expected = ra * rb * T * static_cast<double>(cfg.bin_width_ps);
      out.normalized[k] = expected > 0 ? static_cast<double>(out.counts[k]) / expected : 0.0;
    }
  }
  return out;
}

std::int64_t count_in(const std::vector<PhotonEvent>& ev, std::int64_t until) {
  return std::upper_bound(ev.begin(), ev.end(), until,
                          [](std::int64_t t, const PhotonEvent& e) { return t < e.t_ps; }) -
         ev.begin();
}

}  // namespace

Correlogram correlate(const ClickStream& a, const ClickStream& b, const CorrelogramConfig& cfg, unsigned shards) {
  cfg.validate();
  check_sorted(a);
  check_sorted(b);
  // Both streams start at 0, so the overlap is the shorter of the two durations.
  const std::int64_t overlap = std::min(a.duration_ps, b.duration_ps);
  const bool self = &a == &b;
  return correlate_spans({a.events.data(), a.events.size()}, {b.events.data(), b.events.size()}, self, overlap, cfg,
                         count_in(a.events, overlap), count_in(b.events, overlap), shards);
}

Correlogram conditioned_g2_estimate(const ClickStream& a, const ClickStream& b, const CorrelogramConfig& cfg,
                                    unsigned shards) {
  cfg.validate();
  check_sorted(a);
  check_sorted(b);
  const ClickStream fa = filter(a, cfg.filter_a);
  if (&a == &b && cfg.filter_a == cfg.filter_b) return correlate(fa, fa, cfg, shards);
  const ClickStream fb = filter(b, cfg.filter_b);
  Correlogram out = correlate(fa, fb, cfg, shards);
  if (&a != &b || out.empty) return out;

  // Timestamps are unique within a stream, so a shared timestamp is an event that
  // passed both filters and was paired with itself.
  std::uint64_t self_pairs = 0;
  for (std::size_t i = 0, j = 0; i < fa.events.size() && j < fb.events.size();) {
    if (fa.events[i].t_ps < fb.events[j].t_ps) {
      ++i;
    } else if (fb.events[j].t_ps < fa.events[i].t_ps) {
      ++j;
    } else {
      ++self_pairs;
      ++i;
      ++j;
    }
  }
  if (self_pairs == 0) return out;
  const auto zero = static_cast<std::size_t>(out.half());
  const double before = static_cast<double>(out.counts[zero]);
  out.counts[zero] -= self_pairs;
  out.total_pairs -= self_pairs;
  if (before > 0) out.normalized[zero] *= static_cast<double>(out.counts[zero]) / before;
  return out;
}

Correlogram conditioned_g2_jackknife(const ClickStream& a, const ClickStream& b, const CorrelogramConfig& cfg,
                                     std::size_t blocks, unsigned shards) {
  if (blocks < 2) throw std::invalid_argument("jackknife needs at least two blocks");
  Correlogram out = conditioned_g2_estimate(a, b, cfg, shards);
  if (out.empty) return out;

  const bool same = &a == &b && cfg.filter_a == cfg.filter_b;
  const ClickStream fa = filter(a, cfg.filter_a);
  const ClickStream fb = same ? fa : filter(b, cfg.filter_b);
  const bool shared_events = &a == &b && !same;
  const std::int64_t T = out.overlap_ps;
  const auto B = static_cast<std::int64_t>(blocks);
  auto edge = [&](std::int64_t i) { return T / B * i + T % B * i / B; };
  // First event index at or after each block edge; the last block keeps everything after it.
  auto starts = [&](const std::vector<PhotonEvent>& ev) {
    std::vector<std::size_t> s(blocks + 1, ev.size());
    for (std::size_t i = 0; i < blocks; ++i)
      s[i] = static_cast<std::size_t>(std::lower_bound(ev.begin(), ev.end(), edge(static_cast<std::int64_t>(i)),
                                                       [](const PhotonEvent& e, std::int64_t t) { return e.t_ps < t; }) -
                                      ev.begin());
    return s;
  };
  const auto sa = starts(fa.events), sb = starts(fb.events);
  const std::int64_t na = count_in(fa.events, T), nb = count_in(fb.events, T);
  // Event counts inside [0, T] per block.
  auto in_block = [&](const std::vector<PhotonEvent>& ev, const std::vector<std::size_t>& s, std::size_t i) {
    const auto hi = i + 1 < blocks ? static_cast<std::int64_t>(s[i + 1]) : count_in(ev, T);
    return std::max<std::int64_t>(0, hi - static_cast<std::int64_t>(s[i]));
  };

  const std::size_t n_bins = out.counts.size();
  const auto zero = static_cast<std::size_t>(out.half());
  std::vector<std::vector<std::uint64_t>> part(blocks, std::vector<std::uint64_t>(n_bins, 0));
  auto work = [&](std::size_t first, std::size_t step) {
    for (std::size_t i = first; i < blocks; i += step) {
      accumulate({fa.events.data(), fa.events.size()}, sa[i], sa[i + 1], {fb.events.data(), fb.events.size()}, same,
                 cfg, part[i]);
      if (!shared_events) continue;
      std::uint64_t self_pairs = 0;
      for (std::size_t x = sa[i], y = sb[i]; x < sa[i + 1] && y < sb[i + 1];) {
        if (fa.events[x].t_ps < fb.events[y].t_ps) {
          ++x;
        } else if (fb.events[y].t_ps < fa.events[x].t_ps) {
          ++y;
        } else {
          ++self_pairs;
          ++x;
          ++y;
        }
      }
      part[i][zero] -= self_pairs;
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(shards, blocks));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 1; w < workers; ++w) jobs.push_back(std::async(std::launch::async, work, w, workers));
  work(0, workers);
  for (auto& j : jobs) j.get();

  out.jackknife.assign(blocks, std::vector<double>(n_bins, 0.0));
  for (std::size_t i = 0; i < blocks; ++i) {
    const auto length = static_cast<double>(edge(static_cast<std::int64_t>(i) + 1) - edge(static_cast<std::int64_t>(i)));
    const double t = static_cast<double>(T) - length;
    const double ra = static_cast<double>(na - in_block(fa.events, sa, i)) / t;
    const double rb = static_cast<double>(nb - in_block(fb.events, sb, i)) / t;
    const double expected = ra * rb * t * static_cast<double>(cfg.bin_width_ps);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const auto c = static_cast<double>(out.counts[k] - part[i][k]);
      out.jackknife[i][k] = cfg.mode == Normalization::RawCounts ? c : (expected > 0 ? c / expected : 0.0);
    }
  }
  return out;
}

}  // namespace ionpair
