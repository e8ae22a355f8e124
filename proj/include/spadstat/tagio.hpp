#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "errors.hpp"
#include "histogram.hpp"
#include "timetags.hpp"

namespace spadstat {

// Tag file layout, fixed little-endian regardless of host:
//   bytes 0..3   magic "TTG1"
//   bytes 4..5   format version, u16
//   bytes 6..13  tick resolution in femtoseconds, u64
//   bytes 14..19 reserved, must be zero
// followed by the payload: one u64 tick per event, strictly increasing.
inline constexpr std::array<char, 4> kTagMagic{'T', 'T', 'G', '1'};
inline constexpr std::uint16_t kTagVersion = 1;
inline constexpr std::size_t kTagHeaderSize = 20;

namespace detail {

inline void put_u16_le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint16_t get_u16_le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

// shortest decimal form that parses back to the identical double
inline std::string fmt_double(double v) {
    std::array<char, 40> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s, const char* what, std::size_t line_no) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw FormatError(std::string(what) + ": bad number at line " +
                          std::to_string(line_no));
    return v;
}

inline std::uint64_t parse_u64(std::string_view s, const char* what, std::size_t line_no) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw FormatError(std::string(what) + ": bad count at line " +
                          std::to_string(line_no));
    return v;
}

} // namespace detail

inline void write_tags(const TimeTagStream& stream, const std::string& path) {
    stream.validate();
    std::string buf;
    buf.reserve(kTagHeaderSize + 8 * stream.ticks.size());
    buf.append(kTagMagic.data(), kTagMagic.size());
    detail::put_u16_le(buf, kTagVersion);
    detail::put_u64_le(buf, stream.tick_resolution_fs);
    buf.append(6, '\0');
    for (std::uint64_t t : stream.ticks) detail::put_u64_le(buf, t);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_tags: cannot open " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    f.flush();
    if (!f) throw IoError("write_tags: write failed for " + path);
}

inline TimeTagStream read_tags(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_tags: cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (!f.good() && !f.eof()) throw IoError("read_tags: read failed for " + path);

    if (data.size() < kTagHeaderSize)
        throw FormatError("read_tags: truncated header (" + std::to_string(data.size()) +
                          " bytes)");
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    if (std::memcmp(p, kTagMagic.data(), kTagMagic.size()) != 0)
        throw FormatError("read_tags: bad magic");
    const std::uint16_t version = detail::get_u16_le(p + 4);
    if (version != kTagVersion)
        throw FormatError("read_tags: unsupported version " + std::to_string(version));
    TimeTagStream s;
    s.tick_resolution_fs = detail::get_u64_le(p + 6);
    if (s.tick_resolution_fs == 0) throw FormatError("read_tags: zero tick resolution");
    for (std::size_t i = 14; i < kTagHeaderSize; ++i)
        if (p[i] != 0) throw FormatError("read_tags: nonzero reserved header bytes");

    const std::size_t payload = data.size() - kTagHeaderSize;
    if (payload % 8 != 0)
        throw FormatError("read_tags: truncated payload (length " + std::to_string(payload) +
                          " is not a multiple of 8)");
    const std::size_t n = payload / 8;
    s.ticks.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t t = detail::get_u64_le(p + kTagHeaderSize + 8 * k);
        if (k > 0 && t <= s.ticks.back())
            throw DataError("read_tags: ticks not strictly increasing at index " +
                                std::to_string(k),
                            kTagHeaderSize + 8 * k);
        s.ticks.push_back(t);
    }
    return s;
}

// Histogram CSV: a fixed header, one row per bin including empty ones, and a
// trailing metadata comment. Doubles are written in shortest-round-trip
// form, so write/read/write is byte-stable.
inline void write_histogram_csv(const InterArrivalHistogram& h, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("write_histogram_csv: cannot open " + path);
    f << "bin_index,count,bin_lo_ps,bin_hi_ps\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double lo = h.bin_width_ps * static_cast<double>(i);
        const double hi = h.bin_width_ps * static_cast<double>(i + 1);
        f << (i + 1) << ',' << h.counts[i] << ',' << detail::fmt_double(lo) << ','
          << detail::fmt_double(hi) << '\n';
    }
    f << "# total_intervals=" << h.total_intervals << " overflow=" << h.overflow
      << " bin_width_ps=" << detail::fmt_double(h.bin_width_ps) << '\n';
    f.flush();
    if (!f) throw IoError("write_histogram_csv: write failed for " + path);
}

inline InterArrivalHistogram read_histogram_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("read_histogram_csv: cannot open " + path);
    std::string line;
    std::size_t line_no = 0;

    auto next_line = [&]() -> bool {
        if (!std::getline(f, line)) return false;
        ++line_no;
        return true;
    };
    if (!next_line() || line != "bin_index,count,bin_lo_ps,bin_hi_ps")
        throw FormatError("read_histogram_csv: bad header at line 1");

    InterArrivalHistogram h;
    bool have_meta = false;
    while (next_line()) {
        if (line.rfind("# ", 0) == 0) {
            // "# total_intervals=N overflow=M bin_width_ps=W"
            std::string_view v(line);
            v.remove_prefix(2);
            const auto take = [&](std::string_view key) -> std::string_view {
                if (v.substr(0, key.size()) != key)
                    throw FormatError("read_histogram_csv: bad metadata at line " +
                                      std::to_string(line_no));
                v.remove_prefix(key.size());
                const auto sp = v.find(' ');
                std::string_view field = v.substr(0, sp);
                v.remove_prefix(sp == std::string_view::npos ? v.size() : sp + 1);
                return field;
            };
            h.total_intervals =
                detail::parse_u64(take("total_intervals="), "read_histogram_csv", line_no);
            h.overflow = detail::parse_u64(take("overflow="), "read_histogram_csv", line_no);
            h.bin_width_ps =
                detail::parse_double(take("bin_width_ps="), "read_histogram_csv", line_no);
            have_meta = true;
            break;
        }
        std::array<std::string_view, 4> cells;
        std::string_view v(line);
        for (std::size_t c = 0; c < 4; ++c) {
            const auto comma = v.find(',');
            if ((c < 3) != (comma != std::string_view::npos))
                throw FormatError("read_histogram_csv: malformed row at line " +
                                  std::to_string(line_no));
            cells[c] = v.substr(0, comma);
            v.remove_prefix(comma == std::string_view::npos ? v.size() : comma + 1);
        }
        const std::uint64_t idx =
            detail::parse_u64(cells[0], "read_histogram_csv", line_no);
        if (idx != h.counts.size() + 1)
            throw FormatError("read_histogram_csv: bin index out of order at line " +
                              std::to_string(line_no));
        h.counts.push_back(detail::parse_u64(cells[1], "read_histogram_csv", line_no));
        // bin edges are re-derived from the metadata width; they are parsed
        // only to reject corrupted rows early
        detail::parse_double(cells[2], "read_histogram_csv", line_no);
        detail::parse_double(cells[3], "read_histogram_csv", line_no);
    }
    if (!have_meta)
        throw FormatError("read_histogram_csv: missing metadata comment row");
    if (!(h.bin_width_ps > 0.0))
        throw FormatError("read_histogram_csv: non-positive bin width");
    std::uint64_t in_bins = 0;
    for (std::uint64_t c : h.counts) in_bins += c;
    if (in_bins + h.overflow > h.total_intervals)
        throw DataError("read_histogram_csv: counts exceed total_intervals");
    return h;
}

} // namespace spadstat
