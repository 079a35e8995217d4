#include "disco/candidate.hpp"

#include <json.hpp>

#include "disco/dsl.hpp"
#include "disco/errors.hpp"
#include "disco/rng.hpp"

namespace disco {

namespace {

// End (one past the closing brace) of the balanced object starting at
// `start`, honoring string literals and escapes.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

// Chat models often put literal newlines inside JSON strings.
std::string escape_raw_controls(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  for (char c : text) {
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      } else if (c == '\n') {
        out += "\\n";
        continue;
      } else if (c == '\r') {
        out += "\\r";
        continue;
      } else if (c == '\t') {
        out += "\\t";
        continue;
      }
    } else if (c == '"') {
      in_string = true;
    }
    out += c;
  }
  return out;
}

std::string string_field(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseFailure(std::string("candidate object is missing key \"") + key + "\"");
  }
  if (!it->is_string()) {
    throw ParseFailure(std::string("candidate key \"") + key + "\" must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

Candidate parse_candidate(std::string_view response) {
  for (std::size_t start = response.find('{'); start != std::string_view::npos;
       start = response.find('{', start + 1)) {
    const auto end = balanced_end(response, start);
    if (!end) continue;
    const std::string cleaned = escape_raw_controls(response.substr(start, *end - start));
    nlohmann::json obj = nlohmann::json::parse(cleaned, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) continue;
    Candidate c{string_field(obj, "thought"), string_field(obj, "name"),
                string_field(obj, "code")};
    if (c.code.empty()) throw ParseFailure("candidate key \"code\" is empty");
    return c;
  }
  throw ParseFailure("no JSON object found in the response");
}

PreferenceBatch probe_batch(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, RngStream::kProbe);
  auto draw = [&] {
    std::vector<double> v(n);
    for (double& x : v) x = -0.1 - 9.9 * rng.uniform();
    return BatchVector(std::move(v));
  };
  PreferenceBatch b;
  b.policy_chosen_logps = draw();
  b.policy_rejected_logps = draw();
  b.reference_chosen_logps = draw();
  b.reference_rejected_logps = draw();
  return b;
}

std::optional<std::string> validate_candidate(std::string_view source, std::size_t n_probe,
                                              std::uint64_t seed, double beta) {
  dsl::ParseResult parsed = dsl::parse_program(source);
  if (const auto* diag = std::get_if<dsl::ParseDiagnostic>(&parsed)) {
    return diag->to_string();
  }
  const auto& program = std::get<dsl::ObjectiveProgram>(parsed);
  if (auto diag = dsl::check_program(program)) return diag->to_string();
  if (n_probe == 0) return "probe batch must not be empty";
  const PreferenceBatch batch = probe_batch(n_probe, seed);
  try {
    const dsl::ProgramGradient g = dsl::grad_program(program, batch, beta);
    if (g.losses.size() != n_probe && g.losses.size() != 2 * n_probe) {
      return "Expected loss shape to be per input (" + std::to_string(n_probe) +
             " or " + std::to_string(2 * n_probe) + " entries), got " +
             std::to_string(g.losses.size());
    }
  } catch (const std::exception& e) {
    return std::string(e.what());
  }
  return std::nullopt;
}

}  // namespace disco
