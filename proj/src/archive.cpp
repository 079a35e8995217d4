#include "disco/archive.hpp"

#include <stdexcept>

#include <json.hpp>

namespace disco {

std::string_view status_name(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::kValid: return "valid";
    case CandidateStatus::kParseError: return "parse_error";
    case CandidateStatus::kValidationError: return "validation_error";
    case CandidateStatus::kDiverged: return "diverged";
  }
  return "unknown";
}

std::optional<CandidateStatus> status_from_name(std::string_view name) {
  for (auto s : {CandidateStatus::kValid, CandidateStatus::kParseError,
                 CandidateStatus::kValidationError, CandidateStatus::kDiverged}) {
    if (status_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string CandidateRecord::to_json_line() const {
  nlohmann::ordered_json j;
  j["generation"] = generation;
  j["name"] = name;
  j["thought"] = thought;
  j["code"] = code;
  j["status"] = std::string(status_name(status));
  j["error"] = error ? nlohmann::ordered_json(*error) : nullptr;
  j["fitness"] = fitness ? nlohmann::ordered_json(*fitness) : nullptr;
  return j.dump();
}

CandidateRecord CandidateRecord::from_json_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw std::runtime_error("archive line is not a JSON object");
  }
  try {
    CandidateRecord r;
    r.generation = j.at("generation").get<std::size_t>();
    r.name = j.at("name").get<std::string>();
    r.thought = j.at("thought").get<std::string>();
    r.code = j.at("code").get<std::string>();
    const auto status = status_from_name(j.at("status").get<std::string>());
    if (!status) throw std::runtime_error("unknown status in archive line");
    r.status = *status;
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    if (!j.at("fitness").is_null()) r.fitness = j.at("fitness").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed archive line: ") + e.what());
  }
}

Archive::Archive(const std::string& path)
    : file_(std::make_shared<std::ofstream>(path, std::ios::trunc)) {
  if (!*file_) throw std::runtime_error("cannot open archive file " + path);
}

void Archive::add(CandidateRecord record) {
  if (file_) {
    *file_ << record.to_json_line() << '\n';
    file_->flush();
  }
  records_.push_back(std::move(record));
}

std::optional<std::size_t> Archive::best() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.status != CandidateStatus::kValid || !r.fitness) continue;
    if (!best || *r.fitness > *records_[*best].fitness) best = i;
  }
  return best;
}

std::string Archive::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    out += r.to_json_line();
    out += '\n';
  }
  return out;
}

Archive Archive::load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open archive file " + path);
  Archive a;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    a.records_.push_back(CandidateRecord::from_json_line(line));
  }
  return a;
}

}  // namespace disco
