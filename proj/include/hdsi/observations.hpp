#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hdsi/error.hpp"

namespace hdsi {

// Mode cardinalities of a 3-mode observation tensor: stations x indicators x
// time slices.
struct Dims {
    int stations = 0;
    int indicators = 0;
    int times = 0;

    bool operator==(const Dims&) const = default;
    long long total() const {
        return static_cast<long long>(stations) * indicators * times;
    }
};

struct Observation {
    int station = 0;
    int indicator = 0;
    int time = 0;
    double value = 0.0;

    bool operator==(const Observation&) const = default;
};

// Sparse COO observation set. Immutable by convention once validated; all
// pipeline stages produce a fresh set instead of mutating.
struct ObservationSet {
    Dims dims;
    std::vector<Observation> entries;

    std::size_t size() const { return entries.size(); }
};

inline std::uint64_t cell_key(const Dims& dims, int s, int p, int t) {
    return (static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(dims.indicators) +
            static_cast<std::uint64_t>(p)) *
               static_cast<std::uint64_t>(dims.times) +
           static_cast<std::uint64_t>(t);
}

// Bounds, finiteness, and duplicate checks. Duplicates are rejected, not
// averaged: silent aggregation hides data errors.
inline void validate(const ObservationSet& set) {
    if (set.dims.stations <= 0 || set.dims.indicators <= 0 || set.dims.times <= 0)
        throw ValidationError("observation set: dims must be positive");
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(set.entries.size() * 2);
    for (const auto& e : set.entries) {
        if (e.station < 0 || e.station >= set.dims.stations)
            throw ValidationError("observation set: station index " + std::to_string(e.station) +
                                  " out of range [0, " + std::to_string(set.dims.stations) + ")");
        if (e.indicator < 0 || e.indicator >= set.dims.indicators)
            throw ValidationError("observation set: indicator index " +
                                  std::to_string(e.indicator) + " out of range [0, " +
                                  std::to_string(set.dims.indicators) + ")");
        if (e.time < 0 || e.time >= set.dims.times)
            throw ValidationError("observation set: time index " + std::to_string(e.time) +
                                  " out of range [0, " + std::to_string(set.dims.times) + ")");
        if (!std::isfinite(e.value))
            throw ValidationError("observation set: non-finite value at (" +
                                  std::to_string(e.station) + "," + std::to_string(e.indicator) +
                                  "," + std::to_string(e.time) + ")");
        if (!seen.insert(cell_key(set.dims, e.station, e.indicator, e.time)).second)
            throw ValidationError("observation set: duplicate entry (" +
                                  std::to_string(e.station) + "," + std::to_string(e.indicator) +
                                  "," + std::to_string(e.time) + ")");
    }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return fields;
}

inline int parse_int(std::string_view s, long line_no, const char* what) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError(std::string("expected integer ") + what + ", got '" + std::string(s) + "'",
                         line_no);
    return value;
}

inline double parse_double(std::string_view s, long line_no) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError("expected real value, got '" + std::string(s) + "'", line_no);
    return value;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// COO text format: first non-comment line is "|S|,|P|,|T|", every following
// line is "s,p,t,y". '#' starts a comment line.
inline ObservationSet parse_coo(std::istream& in) {
    ObservationSet set;
    std::string line;
    long line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view sv = detail::trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        const auto fields = detail::split_csv(sv);
        if (!have_header) {
            if (fields.size() != 3)
                throw ParseError("header must have 3 fields '|S|,|P|,|T|', got " +
                                     std::to_string(fields.size()),
                                 line_no);
            set.dims.stations = detail::parse_int(fields[0], line_no, "|S|");
            set.dims.indicators = detail::parse_int(fields[1], line_no, "|P|");
            set.dims.times = detail::parse_int(fields[2], line_no, "|T|");
            have_header = true;
            continue;
        }
        if (fields.size() != 4)
            throw ParseError("entry must have 4 fields 's,p,t,y', got " +
                                 std::to_string(fields.size()),
                             line_no);
        Observation e;
        e.station = detail::parse_int(fields[0], line_no, "s");
        e.indicator = detail::parse_int(fields[1], line_no, "p");
        e.time = detail::parse_int(fields[2], line_no, "t");
        e.value = detail::parse_double(fields[3], line_no);
        set.entries.push_back(e);
    }
    if (!have_header) throw ParseError("missing '|S|,|P|,|T|' header line");
    validate(set);
    return set;
}

inline ObservationSet load_coo(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return parse_coo(in);
}

// Values are written with 17 significant digits so load(save(x)) reproduces
// every double bit-exactly.
inline void write_coo(std::ostream& out, const ObservationSet& set,
                      const std::string& comment = "") {
    if (!comment.empty()) out << "# " << comment << "\n";
    out << set.dims.stations << "," << set.dims.indicators << "," << set.dims.times << "\n";
    for (const auto& e : set.entries)
        out << e.station << "," << e.indicator << "," << e.time << ","
            << detail::format_double(e.value) << "\n";
}

inline void save_coo(const std::string& path, const ObservationSet& set,
                     const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_coo(out, set, comment);
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace hdsi
