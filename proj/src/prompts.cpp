#include "disco/prompts.hpp"

#include <stdexcept>

#include "disco/dsl.hpp"
#include "disco/text_format.hpp"
#include "prompt_text.hpp"

namespace disco {

namespace {

constexpr std::string_view kNext = "Please generate the next one.";

}  // namespace

std::string_view prompt_mode_name(PromptMode mode) {
  return mode == PromptMode::kDsl ? "dsl" : "replay";
}

std::optional<PromptMode> prompt_mode_from_name(std::string_view name) {
  if (name == "dsl") return PromptMode::kDsl;
  if (name == "replay") return PromptMode::kReplay;
  return std::nullopt;
}

std::vector<BurnInEntry> replay_burn_in() {
  std::vector<BurnInEntry> out;
  for (const auto& l : prompt_text::kListings) out.push_back({l.name, l.code, l.fitness});
  return out;
}

std::string dsl_reference() {
  return "Write the \"code\" value in the following expression language instead of "
         "python. A program is a sequence of lines \"let name = expression\" followed "
         "by one result expression that gives the per-example losses.\n"
         "Inputs: pcl, prl (policy chosen/rejected log-probabilities), rcl, rrl "
         "(reference chosen/rejected log-probabilities), each a vector with one "
         "entry per example, and the scalar beta.\n"
         "Operators: + - * / and unary minus, with parentheses. Numbers are decimal "
         "with an optional exponent.\n"
         "Elementwise functions: exp, log, log1p, sigmoid, logsigmoid, relu, abs, "
         "pow(x, literal), clamp_min(x, scalar), min(a, b), max(a, b), "
         "indicator_lt(a, b), indicator_gt(a, b), where(cond, a, b).\n"
         "Reductions returning a scalar: mean, var, std. concat(a, b) joins two "
         "vectors.\n"
         "The result must have one entry per example (or two, via concat). Lines "
         "starting with # are comments.\n";
}

std::string system_prompt(PromptMode mode) {
  std::string out = prompt_text::kSystemHead;
  if (mode == PromptMode::kReplay) {
    out += prompt_text::kSystemExample;
  } else {
    out += dsl::builtin_source(LossId::kDpo);
  }
  out += prompt_text::kSystemTail;
  if (mode == PromptMode::kDsl) {
    out += '\n';
    out += dsl_reference();
  }
  return out;
}

std::string burn_in_user_message(std::span<const BurnInEntry> entries) {
  std::string out = prompt_text::kUserHead;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out += ",\n";
    out += "{\n    \"code\": \"\n";
    out += entries[i].code;
    out += "\n    \",\n    \"fitness\": ";
    out += format_double(entries[i].fitness);
    out += "\n}";
  }
  out += prompt_text::kUserTail;
  return out;
}

std::vector<ChatMessage> build_burn_in_context(std::span<const BurnInEntry> entries,
                                               PromptMode mode) {
  if (entries.empty()) throw std::invalid_argument("burn-in needs at least one entry");
  return {{"system", system_prompt(mode)}, {"user", burn_in_user_message(entries)}};
}

ChatMessage feedback_message(double fitness) {
  return {"user", "Fitness: " + format_double(fitness) + ".\n" + std::string(kNext)};
}

ChatMessage feedback_message(std::string_view error) {
  return {"user",
          "Code not valid. Error:\n" + std::string(error) + "\n" + std::string(kNext)};
}

}  // namespace disco
