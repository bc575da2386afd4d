#pragma once

// Core CSV schema: a header row naming feature columns f0..f{d-1}, an `error`
// column (required for source files, optional for production files) and an
// optional `score` column holding externally computed estimator output.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace shiftmon::csv {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view tok, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
        throw IngestError("line " + std::to_string(line_no) + ": cannot parse number '" + std::string(tok) + "'");
    return v;
}

} // namespace detail

/// Column layout resolved from a header row.
struct Schema {
    std::size_t dimension = 0;
    std::vector<int> feature_col;
    int error_col = -1;
    int score_col = -1;
    std::size_t width = 0;

    bool has_error() const noexcept { return error_col >= 0; }
    bool has_score() const noexcept { return score_col >= 0; }

    static Schema parse(std::string_view header) {
        Schema s;
        auto cols = detail::split(header);
        s.width = cols.size();
        std::vector<int> by_index;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            auto name = cols[c];
            if (name == "error") {
                if (s.error_col >= 0) throw IngestError("duplicate column 'error'");
                s.error_col = static_cast<int>(c);
            } else if (name == "score") {
                if (s.score_col >= 0) throw IngestError("duplicate column 'score'");
                s.score_col = static_cast<int>(c);
            } else if (name.size() > 1 && name[0] == 'f') {
                std::size_t idx = 0;
                auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
                if (ec != std::errc() || ptr != name.data() + name.size())
                    throw IngestError("unknown column '" + std::string(name) + "'");
                if (by_index.size() <= idx) by_index.resize(idx + 1, -1);
                if (by_index[idx] >= 0) throw IngestError("duplicate column '" + std::string(name) + "'");
                by_index[idx] = static_cast<int>(c);
            } else {
                throw IngestError("unknown column '" + std::string(name) + "'");
            }
        }
        for (std::size_t i = 0; i < by_index.size(); ++i)
            if (by_index[i] < 0) throw IngestError("missing feature column f" + std::to_string(i));
        s.feature_col = std::move(by_index);
        s.dimension = s.feature_col.size();
        return s;
    }

    std::string header() const {
        std::string out;
        for (std::size_t i = 0; i < dimension; ++i) {
            if (i) out += ',';
            out += "f" + std::to_string(i);
        }
        auto add = [&](const char* name) {
            if (!out.empty()) out += ',';
            out += name;
        };
        if (has_error()) add("error");
        if (has_score()) add("score");
        return out;
    }
};

struct Row {
    std::vector<double> features;
    std::optional<double> error;
    std::optional<double> score;
};

inline Row parse_row(const Schema& schema, std::string_view line, std::size_t line_no) {
    auto toks = detail::split(line);
    if (toks.size() != schema.width)
        throw IngestError("line " + std::to_string(line_no) + ": expected " + std::to_string(schema.width) +
                          " fields, got " + std::to_string(toks.size()));
    Row r;
    r.features.reserve(schema.dimension);
    for (int c : schema.feature_col) r.features.push_back(detail::parse_double(toks[c], line_no));
    if (schema.has_error()) {
        double e = detail::parse_double(toks[schema.error_col], line_no);
        if (!(e >= 0.0 && e <= 1.0))
            throw IngestError("line " + std::to_string(line_no) + ": error outside [0,1] (normalize before ingestion)");
        r.error = e;
    }
    if (schema.has_score()) r.score = detail::parse_double(toks[schema.score_col], line_no);
    return r;
}

/// Incremental reader used for streaming production data one line at a time.
class StreamReader {
public:
    explicit StreamReader(std::istream& in) : in_(in) {
        std::string header;
        if (!std::getline(in_, header)) throw IngestError("missing header row");
        schema_ = Schema::parse(header);
        line_no_ = 1;
    }

    const Schema& schema() const noexcept { return schema_; }

    std::optional<Row> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (detail::trim(line).empty()) continue;
            return parse_row(schema_, line, line_no_);
        }
        return std::nullopt;
    }

private:
    std::istream& in_;
    Schema schema_;
    std::size_t line_no_ = 0;
};

/// Reads a labeled source file. `error` is mandatory.
inline Dataset read_dataset(std::istream& in) {
    StreamReader reader(in);
    if (!reader.schema().has_error()) throw IngestError("source file requires an 'error' column");
    Dataset out;
    while (auto row = reader.next()) out.push_back(ErrorSample{std::move(row->features), *row->error, row->score});
    if (out.empty()) throw IngestError("no data rows");
    return out;
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    return read_dataset(in);
}

/// Reads a production file into stream events; times are 1-based row numbers.
inline std::vector<StreamEvent> read_events(std::istream& in) {
    StreamReader reader(in);
    std::vector<StreamEvent> out;
    std::int64_t t = 0;
    while (auto row = reader.next()) out.push_back(StreamEvent{++t, std::move(row->features), row->error, row->score});
    if (out.empty()) throw IngestError("no data rows");
    return out;
}

inline std::vector<StreamEvent> read_events(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    return read_events(in);
}

/// Scores from the `score` column, in file order.
inline std::vector<double> load_scores(std::istream& in) {
    StreamReader reader(in);
    if (!reader.schema().has_score()) throw IngestError("missing 'score' column");
    std::vector<double> out;
    while (auto row = reader.next()) out.push_back(*row->score);
    if (out.empty()) throw IngestError("no data rows");
    return out;
}

inline std::vector<double> load_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    return load_scores(in);
}

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline void write_dataset(std::ostream& out, const Dataset& data) {
    Schema s;
    s.dimension = data.dimension();
    s.error_col = 0;
    s.score_col = data.has_scores() && !data.empty() ? 0 : -1;
    out << s.header() << '\n';
    for (const auto& smp : data) {
        for (std::size_t i = 0; i < smp.features.size(); ++i) out << (i ? "," : "") << format_double(smp.features[i]);
        out << (smp.features.empty() ? "" : ",") << format_double(smp.true_error);
        if (s.has_score()) out << ',' << format_double(*smp.est_score);
        out << '\n';
    }
}

/// Writes events in core schema; `error`/`score` columns appear when every
/// event carries them.
inline void write_events(std::ostream& out, const std::vector<StreamEvent>& events) {
    Schema s;
    s.dimension = events.empty() ? 0 : events.front().features.size();
    bool all_err = !events.empty(), all_score = !events.empty();
    for (const auto& e : events) {
        all_err = all_err && e.true_error.has_value();
        all_score = all_score && e.est_score.has_value();
    }
    s.error_col = all_err ? 0 : -1;
    s.score_col = all_score ? 0 : -1;
    out << s.header() << '\n';
    for (const auto& e : events) {
        for (std::size_t i = 0; i < e.features.size(); ++i) out << (i ? "," : "") << format_double(e.features[i]);
        bool first = e.features.empty();
        if (all_err) out << (first ? "" : ",") << format_double(*e.true_error), first = false;
        if (all_score) out << (first ? "" : ",") << format_double(*e.est_score);
        out << '\n';
    }
}

} // namespace shiftmon::csv
