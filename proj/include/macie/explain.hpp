#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "macie/collective.hpp"

namespace macie {

enum class Verbosity { concise, detailed, full };
std::string to_string(Verbosity v);
Verbosity verbosity_from_string(const std::string& text);

// One line of text plus the values it states. Agents are 0-based here and printed
// 1-based; every printed number is its structured value at 3 decimals (percentages are
// the 3-decimal fraction times 100).
struct ExplanationLine {
  std::string kind;  // agent, critical, detail, emergence, interference, interaction, counterfactual
  std::vector<std::size_t> agents;
  std::vector<double> numbers;
  std::string text;

  friend bool operator==(const ExplanationLine&, const ExplanationLine&) = default;
};

struct Explanation {
  std::vector<ExplanationLine> lines;

  std::string render() const;  // lines joined by '\n', trailing newline
  friend bool operator==(const Explanation&, const Explanation&) = default;
};

// "52.3" for 0.523 (sign dropped).
std::string percent_text(double fraction);

std::vector<ExplanationLine> explain_agent(std::size_t agent, double phi, double phi_hat,
                                           const std::vector<int>& critical, double ci_low,
                                           double ci_high, Verbosity verbosity,
                                           double ci_level = 0.95);
std::optional<ExplanationLine> explain_emergence(double si, double tau_si = 0.1);
std::vector<ExplanationLine> explain_interactions(const InteractionSet& set);
ExplanationLine explain_counterfactual(std::size_t star_agent, double phi_star, double y_fact,
                                       double y_cf_star);

std::string join_text(const std::vector<ExplanationLine>& lines);

}  // namespace macie
