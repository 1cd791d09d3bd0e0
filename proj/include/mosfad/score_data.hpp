#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mosfad {

enum class Label { bonafide, spoof, unknown };
enum class Split { train, valid, eval };
enum class FileFormat { jsonl, csv };

std::string_view to_string(Label label);
std::string_view to_string(Split split);
Label parse_label(std::string_view text);
Split parse_split(std::string_view text);
FileFormat parse_format(std::string_view text);
// jsonl unless the extension is .csv
FileFormat format_from_path(const std::filesystem::path& path);

// One utterance: detection scores from n systems in [0,1], quality
// predictions from m systems in [0,5] and an optional fused quality score.
struct ScoreRecord {
    std::string utt_id;
    Label label = Label::unknown;
    Split split = Split::eval;
    std::vector<double> fad;
    std::vector<double> mos;
    std::optional<double> mos_fused;

    bool operator==(const ScoreRecord&) const = default;
};

// Validated, ordered collection of records sharing one fad/mos dimension.
// Immutable once constructed.
class Dataset {
public:
    Dataset() = default;
    // Validates every record against the given dimensions. Throws
    // ValidationError naming the offending utt_id.
    Dataset(std::vector<ScoreRecord> records, std::size_t fad_dim, std::size_t mos_dim);

    // Dimensions are taken from the first record (0/0 when empty).
    static Dataset from_records(std::vector<ScoreRecord> records);

    const std::vector<ScoreRecord>& records() const { return records_; }
    const ScoreRecord& operator[](std::size_t i) const { return records_[i]; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::size_t fad_dim() const { return fad_dim_; }
    std::size_t mos_dim() const { return mos_dim_; }

    auto begin() const { return records_.begin(); }
    auto end() const { return records_.end(); }

    bool operator==(const Dataset&) const = default;

private:
    std::vector<ScoreRecord> records_;
    std::size_t fad_dim_ = 0;
    std::size_t mos_dim_ = 0;
};

// Checks range, finiteness and label/split invariants of a single record.
void validate_record(const ScoreRecord& record);

Dataset load_records(const std::filesystem::path& path, FileFormat format);
Dataset load_records(const std::filesystem::path& path);
void save_records(const Dataset& ds, const std::filesystem::path& path, FileFormat format);
void save_records(const Dataset& ds, const std::filesystem::path& path);

// Parsing entry points used by load_records; exposed for in-memory tests.
Dataset parse_jsonl(std::string_view text);
Dataset parse_csv(std::string_view text);
std::string to_jsonl(const Dataset& ds);
std::string to_csv(const Dataset& ds);

Dataset select_split(const Dataset& ds, Split split);

// Keeps records whose label is bonafide or spoof.
Dataset labeled_only(const Dataset& ds);

}  // namespace mosfad
