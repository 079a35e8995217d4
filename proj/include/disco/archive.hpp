#pragma once

#include <cstddef>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace disco {

enum class CandidateStatus { kValid, kParseError, kValidationError, kDiverged };

std::string_view status_name(CandidateStatus s);
std::optional<CandidateStatus> status_from_name(std::string_view name);

struct CandidateRecord {
  std::size_t generation = 0;
  std::string name;
  std::string thought;
  std::string code;
  CandidateStatus status = CandidateStatus::kValid;
  std::optional<std::string> error;
  std::optional<double> fitness;  // present iff status is valid

  // One JSON object, keys in the order generation, name, thought, code,
  // status, error, fitness; absent values are null.
  std::string to_json_line() const;
  static CandidateRecord from_json_line(std::string_view line);

  friend bool operator==(const CandidateRecord&, const CandidateRecord&) = default;
};

struct BurnInResult {
  std::string name;
  double fitness;
};

// Append-only record of evaluated candidates, optionally mirrored line by
// line to a JSONL file.
class Archive {
 public:
  Archive() = default;
  // Truncates `path` and appends every later record to it.
  explicit Archive(const std::string& path);

  void add(CandidateRecord record);

  const std::vector<CandidateRecord>& records() const { return records_; }
  std::vector<BurnInResult>& burn_in() { return burn_in_; }
  const std::vector<BurnInResult>& burn_in() const { return burn_in_; }

  // Index of the highest-fitness valid record; ties go to the earliest.
  std::optional<std::size_t> best() const;

  std::string to_jsonl() const;
  // Throws std::runtime_error on malformed lines.
  static Archive load_jsonl(const std::string& path);

 private:
  std::vector<CandidateRecord> records_;
  std::vector<BurnInResult> burn_in_;
  std::shared_ptr<std::ofstream> file_;
};

}  // namespace disco
