#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "timetags.hpp"

namespace spadstat {

// Binned waiting times between consecutive detections. Bin n (1-based)
// covers [(n-1) w, n w); gaps at or beyond the range go to overflow, and
// total_intervals counts every gap including the overflowed ones.
struct InterArrivalHistogram {
    double bin_width_ps = 0.0;
    std::vector<std::uint64_t> counts; // counts[n-1] is bin n
    std::uint64_t total_intervals = 0;
    std::uint64_t overflow = 0;

    double range_max_ps() const {
        return bin_width_ps * static_cast<double>(counts.size());
    }
};

// Histogram the consecutive differences of a tag stream. Binning runs on the
// integer femtosecond lattice, so equal inputs bin identically on every
// platform; the range is normalized up to a whole number of bins (a written
// histogram must read back with the same geometry).
inline InterArrivalHistogram build_histogram(const TimeTagStream& tags, double bin_width_ps,
                                             double range_max_ps) {
    if (tags.tick_resolution_fs == 0)
        throw DomainError("build_histogram: tick resolution must be positive");
    const std::uint64_t bw_fs = ps_to_fs_exact(bin_width_ps, "build_histogram bin width");
    const std::uint64_t range_fs = ps_to_fs_exact(range_max_ps, "build_histogram range");
    const std::uint64_t nbins = (range_fs + bw_fs - 1) / bw_fs;
    if (nbins == 0 || nbins > (std::uint64_t{1} << 32))
        throw DomainError("build_histogram: bin count out of range");

    InterArrivalHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.counts.assign(nbins, 0);
    if (tags.ticks.size() < 2) return h;

    const std::uint64_t res = tags.tick_resolution_fs;
    const std::uint64_t max_gap_ticks = std::numeric_limits<std::uint64_t>::max() / res;
    for (std::size_t k = 1; k < tags.ticks.size(); ++k) {
        if (tags.ticks[k] <= tags.ticks[k - 1])
            throw DataError("build_histogram: ticks not strictly increasing at index " +
                                std::to_string(k),
                            20 + 8 * static_cast<std::uint64_t>(k));
        const std::uint64_t gap_ticks = tags.ticks[k] - tags.ticks[k - 1];
        if (gap_ticks > max_gap_ticks)
            throw DomainError("build_histogram: interval overflows the femtosecond lattice");
        const std::uint64_t bin = gap_ticks * res / bw_fs; // 0-based
        if (bin >= nbins)
            ++h.overflow;
        else
            ++h.counts[bin];
    }
    h.total_intervals = static_cast<std::uint64_t>(tags.ticks.size() - 1);
    return h;
}

// Merge partial histograms built from contiguous chunks of one stream. The
// chunks must share geometry; the caller re-feeds the boundary tag so the
// seam interval is counted exactly once (see build_histogram_chunked).
inline InterArrivalHistogram merge_histograms(const InterArrivalHistogram& a,
                                              const InterArrivalHistogram& b) {
    if (a.bin_width_ps != b.bin_width_ps || a.counts.size() != b.counts.size())
        throw DomainError("merge_histograms: mismatched geometry");
    InterArrivalHistogram m = a;
    for (std::size_t i = 0; i < m.counts.size(); ++i) m.counts[i] += b.counts[i];
    m.total_intervals += b.total_intervals;
    m.overflow += b.overflow;
    return m;
}

// Chunked driver, bit-identical to one pass over the whole stream. Each
// chunk after the first starts at the previous chunk's last tag, which
// preserves the interval straddling the seam.
inline InterArrivalHistogram build_histogram_chunked(const TimeTagStream& tags,
                                                     double bin_width_ps, double range_max_ps,
                                                     std::size_t chunk_len) {
    if (chunk_len < 2) throw DomainError("build_histogram_chunked: chunk_len must be >= 2");
    InterArrivalHistogram acc = build_histogram(
        TimeTagStream{tags.tick_resolution_fs, {}}, bin_width_ps, range_max_ps);
    std::size_t start = 0;
    while (start + 1 < tags.ticks.size()) {
        const std::size_t stop = std::min(start + chunk_len, tags.ticks.size());
        TimeTagStream chunk{tags.tick_resolution_fs,
                            {tags.ticks.begin() + static_cast<std::ptrdiff_t>(start),
                             tags.ticks.begin() + static_cast<std::ptrdiff_t>(stop)}};
        acc = merge_histograms(acc, build_histogram(chunk, bin_width_ps, range_max_ps));
        if (stop == tags.ticks.size()) break;
        start = stop - 1; // overlap one tag across the seam
    }
    return acc;
}

} // namespace spadstat
