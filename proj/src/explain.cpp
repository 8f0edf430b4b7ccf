#include "macie/explain.hpp"

#include <cmath>

#include "macie/format.hpp"

namespace macie {

std::string to_string(Verbosity v) {
  switch (v) {
    case Verbosity::concise: return "concise";
    case Verbosity::detailed: return "detailed";
    case Verbosity::full: return "full";
  }
  return "unknown";
}

Verbosity verbosity_from_string(const std::string& text) {
  if (text == "concise") return Verbosity::concise;
  if (text == "detailed") return Verbosity::detailed;
  if (text == "full") return Verbosity::full;
  throw ConfigError("unknown verbosity '" + text + "' (valid: concise, detailed, full)");
}

std::string Explanation::render() const {
  std::string out;
  for (const auto& l : lines) out += l.text + "\n";
  return out;
}

std::string join_text(const std::vector<ExplanationLine>& lines) {
  std::string out;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (k) out += '\n';
    out += lines[k].text;
  }
  return out;
}

std::string percent_text(double fraction) {
  // Shift the point of the 3-decimal text so both renderings agree digit for digit.
  std::string s = fixed(std::abs(fraction), 3);
  const auto dot = s.find('.');
  std::string digits = s.substr(0, dot) + s.substr(dot + 1);
  while (digits.size() > 2 && digits.front() == '0') digits.erase(0, 1);
  return digits.substr(0, digits.size() - 1) + "." + digits.substr(digits.size() - 1);
}

namespace {

std::string agent_name(std::size_t agent) { return std::to_string(agent + 1); }

std::string timestep_list(const std::vector<int>& ts) {
  std::string out;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (k) out += ", ";
    out += std::to_string(ts[k]);
  }
  return out;
}

}  // namespace

std::vector<ExplanationLine> explain_agent(std::size_t agent, double phi, double phi_hat,
                                           const std::vector<int>& critical, double ci_low,
                                           double ci_high, Verbosity verbosity, double ci_level) {
  std::vector<ExplanationLine> out;
  const bool negative = phi < 0.0;
  out.push_back({"agent", {agent}, {phi_hat},
                 "Agent " + agent_name(agent) + " contributed " + percent_text(phi_hat) +
                     "% to the outcome (" + (negative ? "Negative" : "Positive") + " impact)."});
  if (verbosity == Verbosity::concise) return out;
  ExplanationLine crit{"critical", {agent}, {}, ""};
  for (int t : critical) crit.numbers.push_back(t);
  crit.text = critical.empty()
                  ? "Agent " + agent_name(agent) + ": no critical timesteps detected."
                  : "Agent " + agent_name(agent) + ": critical actions occurred at timesteps " +
                        timestep_list(critical) + ".";
  out.push_back(std::move(crit));
  if (verbosity == Verbosity::detailed) return out;
  out.push_back({"detail", {agent}, {phi, ci_low, ci_high},
                 "Agent " + agent_name(agent) + ": phi = " + fixed(phi, 3) + ", " +
                     shortest(100.0 * ci_level) + "% CI [" + fixed(ci_low, 3) + ", " +
                     fixed(ci_high, 3) + "]."});
  return out;
}

std::optional<ExplanationLine> explain_emergence(double si, double tau_si) {
  if (si > tau_si) {
    return ExplanationLine{"emergence", {}, {si},
                           "Positive emergence detected: collective performance exceeds the sum "
                           "of individual contributions (SI = " + fixed(si, 3) + ")."};
  }
  if (si < -tau_si) {
    return ExplanationLine{"interference", {}, {si},
                           "Negative emergence detected: collective performance falls short of "
                           "the sum of individual contributions (SI = " + fixed(si, 3) + ")."};
  }
  return std::nullopt;
}

std::vector<ExplanationLine> explain_interactions(const InteractionSet& set) {
  std::vector<ExplanationLine> out;
  for (const auto& e : set) {
    const std::string kind = e.sigma > 0.0 ? "positive synergy (cooperation)" : "negative synergy (interference)";
    out.push_back({"interaction", {e.i, e.j}, {e.sigma},
                   "Agents " + agent_name(e.i) + " and " + agent_name(e.j) + " exhibit " + kind +
                       " (sigma = " + fixed(e.sigma, 3) + ")."});
  }
  return out;
}

ExplanationLine explain_counterfactual(std::size_t star_agent, double phi_star, double y_fact,
                                       double y_cf_star) {
  return {"counterfactual", {star_agent}, {-phi_star, y_fact, y_cf_star},
          "Counterfactual: Without agent " + agent_name(star_agent) + ", the outcome would change by " +
              fixed(-phi_star, 3) + " (from " + fixed(y_fact, 3) + " to " + fixed(y_cf_star, 3) + ")."};
}

}  // namespace macie
