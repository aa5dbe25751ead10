#pragma once

/**
 * Round-prompt construction shared by the exporter, the metrics series
 * and the synthesis loop. A template is three pieces:
 *
 *   base                 must contain {question}
 *   scratchpad_section   must contain {scratchpad}; dropped when the
 *                        scratchpad is empty (the first-round shape)
 *   observation_section  must contain {observation}; appended only when
 *                        the previous event produced one
 */

#include <optional>
#include <string>
#include <string_view>

namespace ctxkit::prompt {

struct PromptTemplate {
  std::string base;
  std::string scratchpad_section;
  std::string observation_section;
};

/// The built-in template ("default"). Throws std::invalid_argument on an
/// unknown id.
PromptTemplate template_by_id(std::string_view id);

/// Substitute the slots. Throws std::invalid_argument when a required
/// slot is missing from its piece.
std::string render_round_prompt(
    const PromptTemplate& tmpl, std::string_view question,
    std::string_view scratchpad,
    const std::optional<std::string>& observation = std::nullopt);

}  // namespace ctxkit::prompt
