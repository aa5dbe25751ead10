#include "ctxkit/prompt.hpp"

#include <stdexcept>

namespace ctxkit::prompt {

namespace {

// Replaces every occurrence; throws when the slot is absent.
std::string substitute(std::string_view piece, std::string_view slot,
                       std::string_view value) {
  const std::size_t pos = piece.find(slot);
  if (pos == std::string_view::npos)
    throw std::invalid_argument("prompt template piece is missing slot " +
                                std::string(slot));
  std::string out;
  out.reserve(piece.size() + value.size());
  std::size_t start = 0;
  for (std::size_t p = pos; p != std::string_view::npos;
       p = piece.find(slot, start)) {
    out.append(piece.substr(start, p - start));
    out.append(value);
    start = p + slot.size();
  }
  out.append(piece.substr(start));
  return out;
}

}  // namespace

PromptTemplate template_by_id(std::string_view id) {
  if (id == "default") {
    return PromptTemplate{
        "Return your final response within \\boxed{}.\n### Question:\n"
        "{question}",
        "\n### Current Scratchpad:\n{scratchpad}",
        "\n### Observation:\n{observation}",
    };
  }
  throw std::invalid_argument("unknown prompt template \"" + std::string(id) +
                              "\"");
}

std::string render_round_prompt(const PromptTemplate& tmpl,
                                std::string_view question,
                                std::string_view scratchpad,
                                const std::optional<std::string>& observation) {
  std::string out = substitute(tmpl.base, "{question}", question);
  if (!scratchpad.empty())
    out += substitute(tmpl.scratchpad_section, "{scratchpad}", scratchpad);
  if (observation)
    out += substitute(tmpl.observation_section, "{observation}", *observation);
  return out;
}

}  // namespace ctxkit::prompt
