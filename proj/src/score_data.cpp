#include "mosfad/score_data.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mosfad/error.hpp"
#include "mosfad/io_util.hpp"

namespace mosfad {

using nlohmann::json;

std::string_view to_string(Label label) {
    switch (label) {
        case Label::bonafide: return "bonafide";
        case Label::spoof: return "spoof";
        case Label::unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::eval: return "eval";
    }
    return "eval";
}

Label parse_label(std::string_view text) {
    if (text == "bonafide") return Label::bonafide;
    if (text == "spoof") return Label::spoof;
    if (text == "unknown") return Label::unknown;
    throw ValidationError("invalid label '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "valid") return Split::valid;
    if (text == "eval") return Split::eval;
    throw ValidationError("invalid split '" + std::string(text) + "'");
}

FileFormat parse_format(std::string_view text) {
    if (text == "jsonl") return FileFormat::jsonl;
    if (text == "csv") return FileFormat::csv;
    throw ValidationError("invalid format '" + std::string(text) + "' (expected jsonl or csv)");
}

FileFormat format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? FileFormat::csv : FileFormat::jsonl;
}

namespace {

void check_range(const ScoreRecord& r, const char* field, std::size_t index, double v,
                 double hi) {
    if (!std::isfinite(v)) {
        throw ValidationError("record '" + r.utt_id + "': non-finite value in " + field + "[" +
                              std::to_string(index) + "]");
    }
    if (v < 0.0 || v > hi) {
        throw ValidationError("record '" + r.utt_id + "': " + field + "[" + std::to_string(index) +
                              "] = " + format_double(v) + " outside [0," + format_double(hi) + "]");
    }
}

}  // namespace

void validate_record(const ScoreRecord& r) {
    if (r.utt_id.empty()) {
        throw ValidationError("record with empty utt_id");
    }
    if (r.label == Label::unknown && r.split != Split::eval) {
        throw ValidationError("record '" + r.utt_id + "': label 'unknown' only allowed in eval split");
    }
    if (r.fad.empty()) {
        throw ValidationError("record '" + r.utt_id + "': fad vector is empty");
    }
    for (std::size_t i = 0; i < r.fad.size(); ++i) check_range(r, "fad", i, r.fad[i], 1.0);
    for (std::size_t i = 0; i < r.mos.size(); ++i) check_range(r, "mos", i, r.mos[i], 5.0);
    if (r.mos_fused) {
        double v = *r.mos_fused;
        if (!std::isfinite(v)) {
            throw ValidationError("record '" + r.utt_id + "': non-finite mos_fused");
        }
        if (v < 0.0 || v > 5.0) {
            throw ValidationError("record '" + r.utt_id + "': mos_fused = " + format_double(v) +
                                  " outside [0,5]");
        }
    }
}

Dataset::Dataset(std::vector<ScoreRecord> records, std::size_t fad_dim, std::size_t mos_dim)
    : records_(std::move(records)), fad_dim_(fad_dim), mos_dim_(mos_dim) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(records_.size());
    for (const auto& r : records_) {
        validate_record(r);
        if (r.fad.size() != fad_dim_) {
            throw ValidationError("record '" + r.utt_id + "': fad dimension " +
                                  std::to_string(r.fad.size()) + " != dataset dimension " +
                                  std::to_string(fad_dim_));
        }
        if (r.mos.size() != mos_dim_) {
            throw ValidationError("record '" + r.utt_id + "': mos dimension " +
                                  std::to_string(r.mos.size()) + " != dataset dimension " +
                                  std::to_string(mos_dim_));
        }
        if (!seen.insert(r.utt_id).second) {
            throw ValidationError("duplicate utt_id '" + r.utt_id + "'");
        }
    }
}

Dataset Dataset::from_records(std::vector<ScoreRecord> records) {
    std::size_t n = records.empty() ? 0 : records.front().fad.size();
    std::size_t m = records.empty() ? 0 : records.front().mos.size();
    return Dataset(std::move(records), n, m);
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

std::vector<double> number_array(const json& j, const char* field) {
    if (!j.is_array()) {
        throw ValidationError(std::string("field '") + field + "' must be an array");
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) {
            throw ValidationError(std::string("field '") + field + "' must contain numbers");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

const json& require(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end()) {
        throw ValidationError(std::string("missing field '") + field + "'");
    }
    return *it;
}

ScoreRecord record_from_json(const json& obj) {
    if (!obj.is_object()) {
        throw ValidationError("expected a JSON object");
    }
    ScoreRecord r;
    const auto& id = require(obj, "utt_id");
    if (!id.is_string()) throw ValidationError("field 'utt_id' must be a string");
    r.utt_id = id.get<std::string>();
    const auto& label = require(obj, "label");
    if (!label.is_string()) throw ValidationError("field 'label' must be a string");
    r.label = parse_label(label.get<std::string>());
    const auto& split = require(obj, "split");
    if (!split.is_string()) throw ValidationError("field 'split' must be a string");
    r.split = parse_split(split.get<std::string>());
    r.fad = number_array(require(obj, "fad"), "fad");
    r.mos = number_array(require(obj, "mos"), "mos");
    if (auto it = obj.find("mos_fused"); it != obj.end() && !it->is_null()) {
        if (!it->is_number()) throw ValidationError("field 'mos_fused' must be a number");
        r.mos_fused = it->get<double>();
    }
    return r;
}

json record_to_json(const ScoreRecord& r) {
    json obj = json::object();
    obj["utt_id"] = r.utt_id;
    obj["label"] = std::string(to_string(r.label));
    obj["split"] = std::string(to_string(r.split));
    obj["fad"] = r.fad;
    obj["mos"] = r.mos;
    if (r.mos_fused) obj["mos_fused"] = *r.mos_fused;
    return obj;
}

std::string line_prefix(std::size_t line_no) {
    return "line " + std::to_string(line_no) + ": ";
}

// Builds the dataset while keeping the line number of each record so that
// dimension and uniqueness failures point at the file position.
Dataset assemble(std::vector<ScoreRecord> records, const std::vector<std::size_t>& lines) {
    if (records.empty()) return Dataset{};
    std::size_t n = records.front().fad.size();
    std::size_t m = records.front().mos.size();
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.fad.size() != n || r.mos.size() != m) {
            throw ValidationError(line_prefix(lines[i]) + "record '" + r.utt_id +
                                  "': dimension mismatch (fad " + std::to_string(r.fad.size()) +
                                  ", mos " + std::to_string(r.mos.size()) + "; expected fad " +
                                  std::to_string(n) + ", mos " + std::to_string(m) + ")");
        }
        if (!seen.insert(r.utt_id).second) {
            throw ValidationError(line_prefix(lines[i]) + "duplicate utt_id '" + r.utt_id + "'");
        }
    }
    return Dataset(std::move(records), n, m);
}

}  // namespace

Dataset parse_jsonl(std::string_view text) {
    std::vector<ScoreRecord> records;
    std::vector<std::size_t> lines;
    std::size_t line_no = 0;
    for (auto line : split_view(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        try {
            json obj = json::parse(line);
            ScoreRecord r = record_from_json(obj);
            validate_record(r);
            records.push_back(std::move(r));
            lines.push_back(line_no);
        } catch (const json::exception& e) {
            throw ValidationError(line_prefix(line_no) + "malformed JSON: " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(line_prefix(line_no) + e.what());
        }
    }
    return assemble(std::move(records), lines);
}

std::string to_jsonl(const Dataset& ds) {
    std::string out;
    for (const auto& r : ds) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string csv_header(std::size_t n, std::size_t m) {
    std::string h = "utt_id,label,split,mos_fused";
    for (std::size_t i = 0; i < n; ++i) h += ",fad_" + std::to_string(i);
    for (std::size_t i = 0; i < m; ++i) h += ",mos_" + std::to_string(i);
    return h;
}

double csv_number(std::string_view cell, const char* column, std::size_t line_no) {
    auto v = parse_double(cell);
    if (!v) {
        throw ValidationError(line_prefix(line_no) + "invalid number '" + std::string(cell) +
                              "' in column " + column);
    }
    return *v;
}

}  // namespace

Dataset parse_csv(std::string_view text) {
    auto lines = split_view(text, '\n');
    std::size_t line_no = 0;
    std::size_t n = 0;
    std::size_t m = 0;
    bool have_header = false;
    std::vector<ScoreRecord> records;
    std::vector<std::size_t> record_lines;
    for (auto line : lines) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto cells = split_view(line, ',');
        if (!have_header) {
            if (cells.size() < 5 || cells[0] != "utt_id" || cells[1] != "label" ||
                cells[2] != "split" || cells[3] != "mos_fused") {
                throw ValidationError(line_prefix(line_no) + "invalid CSV header");
            }
            for (std::size_t i = 4; i < cells.size(); ++i) {
                if (cells[i].starts_with("fad_")) {
                    if (m != 0) throw ValidationError(line_prefix(line_no) + "fad column after mos column");
                    ++n;
                } else if (cells[i].starts_with("mos_")) {
                    ++m;
                } else {
                    throw ValidationError(line_prefix(line_no) + "unexpected column '" +
                                          std::string(cells[i]) + "'");
                }
            }
            if (std::string_view(csv_header(n, m)) != line) {
                throw ValidationError(line_prefix(line_no) + "invalid CSV header");
            }
            have_header = true;
            continue;
        }
        if (cells.size() != 4 + n + m) {
            throw ValidationError(line_prefix(line_no) + "expected " + std::to_string(4 + n + m) +
                                  " cells, got " + std::to_string(cells.size()));
        }
        ScoreRecord r;
        try {
            r.utt_id = std::string(cells[0]);
            r.label = parse_label(cells[1]);
            r.split = parse_split(cells[2]);
            if (!cells[3].empty()) r.mos_fused = csv_number(cells[3], "mos_fused", line_no);
            for (std::size_t i = 0; i < n; ++i) r.fad.push_back(csv_number(cells[4 + i], "fad", line_no));
            for (std::size_t i = 0; i < m; ++i) {
                r.mos.push_back(csv_number(cells[4 + n + i], "mos", line_no));
            }
            validate_record(r);
        } catch (const ValidationError& e) {
            std::string msg = e.what();
            if (msg.starts_with("line ")) throw;
            throw ValidationError(line_prefix(line_no) + msg);
        }
        records.push_back(std::move(r));
        record_lines.push_back(line_no);
    }
    if (!have_header) return Dataset{};
    if (records.empty()) return Dataset({}, n, m);
    return assemble(std::move(records), record_lines);
}

std::string to_csv(const Dataset& ds) {
    std::string out = csv_header(ds.fad_dim(), ds.mos_dim());
    out += '\n';
    for (const auto& r : ds) {
        if (r.utt_id.find_first_of(",\"\n\r") != std::string::npos) {
            throw ValidationError("utt_id '" + r.utt_id + "' cannot be written to CSV");
        }
        out += r.utt_id;
        out += ',';
        out += to_string(r.label);
        out += ',';
        out += to_string(r.split);
        out += ',';
        if (r.mos_fused) out += format_double(*r.mos_fused);
        for (double v : r.fad) {
            out += ',';
            out += format_double(v);
        }
        for (double v : r.mos) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

Dataset load_records(const std::filesystem::path& path, FileFormat format) {
    std::string text = read_file(path);
    try {
        return format == FileFormat::jsonl ? parse_jsonl(text) : parse_csv(text);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

Dataset load_records(const std::filesystem::path& path) {
    return load_records(path, format_from_path(path));
}

void save_records(const Dataset& ds, const std::filesystem::path& path, FileFormat format) {
    write_file(path, format == FileFormat::jsonl ? to_jsonl(ds) : to_csv(ds));
}

void save_records(const Dataset& ds, const std::filesystem::path& path) {
    save_records(ds, path, format_from_path(path));
}

Dataset select_split(const Dataset& ds, Split split) {
    std::vector<ScoreRecord> out;
    for (const auto& r : ds) {
        if (r.split == split) out.push_back(r);
    }
    return Dataset(std::move(out), ds.fad_dim(), ds.mos_dim());
}

Dataset labeled_only(const Dataset& ds) {
    std::vector<ScoreRecord> out;
    for (const auto& r : ds) {
        if (r.label != Label::unknown) out.push_back(r);
    }
    return Dataset(std::move(out), ds.fad_dim(), ds.mos_dim());
}

}  // namespace mosfad
