#pragma once

// Tabular results emitted as CSV or JSON, plus the run manifest.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "divlab/digest.hpp"
#include "divlab/errors.hpp"
#include "divlab/numfmt.hpp"

namespace divlab::report {

/// An empty cell renders as nothing in CSV and null in JSON.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

inline Cell cell(std::optional<double> v) { return v ? Cell{*v} : Cell{}; }

enum class Format { csv, json };

inline Format parse_format(const std::string& s) {
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    throw ConfigError("unknown format '" + s + "' (expected csv or json)");
}

inline std::string extension(Format f) { return f == Format::csv ? ".csv" : ".json"; }

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw std::logic_error("table row width does not match header");
        rows.push_back(std::move(row));
    }
};

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::string csv_cell(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::monostate>) return {};
            else if constexpr (std::is_same_v<V, std::int64_t>) return std::to_string(v);
            else if constexpr (std::is_same_v<V, double>) return format_real(v);
            else return csv_field(v);
        },
        c);
}

inline std::string json_cell(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::monostate>) return "null";
            else if constexpr (std::is_same_v<V, std::int64_t>) return std::to_string(v);
            else if constexpr (std::is_same_v<V, double>) return std::isfinite(v) ? format_real(v) : "null";
            else return nlohmann::json(v).dump();
        },
        c);
}

}  // namespace detail

inline std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + detail::csv_field(t.columns[i]);
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + detail::csv_cell(row[i]);
        out += '\n';
    }
    return out;
}

/// An array of objects keyed by column name, one object per line.
inline std::string to_json(const Table& t) {
    std::string out = "[";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out += r ? ",\n {" : "\n {";
        for (std::size_t i = 0; i < t.columns.size(); ++i)
            out += (i ? ", " : "") + nlohmann::json(t.columns[i]).dump() + ": " + detail::json_cell(t.rows[r][i]);
        out += "}";
    }
    return out + (t.rows.empty() ? "]\n" : "\n]\n");
}

inline std::string render(const Table& t, Format f) { return f == Format::csv ? to_csv(t) : to_json(t); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

struct Artifact {
    std::string name;  ///< path relative to the output directory
    std::string sha256;
};

struct ExperimentManifest {
    std::string subcommand;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string format = "csv";
    std::vector<std::string> args;  ///< subcommand arguments needed to re-run, without output flags
    std::vector<Artifact> artifacts;
};

inline nlohmann::json to_json_value(const ExperimentManifest& m) {
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : m.artifacts) arts.push_back({{"name", a.name}, {"sha256", a.sha256}});
    return {{"subcommand", m.subcommand}, {"config", m.config_path}, {"seed", m.seed},
            {"out_dir", m.out_dir},       {"format", m.format},      {"args", m.args},
            {"artifacts", arts}};
}

inline ExperimentManifest manifest_from_json(const nlohmann::json& j) {
    ExperimentManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config_path = j.at("config").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.out_dir = j.at("out_dir").get<std::string>();
    m.format = j.at("format").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    for (const auto& a : j.at("artifacts")) m.artifacts.push_back({a.at("name"), a.at("sha256")});
    return m;
}

/// Collects emitted files and their digests while a subcommand runs.
class OutputSink {
public:
    OutputSink(std::filesystem::path dir, Format format) : dir_(std::move(dir)), format_(format) {}

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
    [[nodiscard]] Format format() const { return format_; }
    [[nodiscard]] const std::vector<Artifact>& artifacts() const { return artifacts_; }

    /// Writes `stem` plus the format extension.
    void table(const std::string& stem, const Table& t) { text(stem + extension(format_), render(t, format_)); }

    void text(const std::string& name, const std::string& content) {
        write_text(dir_ / name, content);
        artifacts_.push_back({name, sha256_hex(content)});
    }

    void json(const std::string& name, const nlohmann::json& value) { text(name, value.dump(2) + "\n"); }

    /// Registers a file already written under dir().
    void file(const std::string& name) { artifacts_.push_back({name, sha256_file(dir_ / name)}); }

private:
    std::filesystem::path dir_;
    Format format_;
    std::vector<Artifact> artifacts_;
};

inline constexpr const char* kManifestName = "manifest.json";

}  // namespace divlab::report
