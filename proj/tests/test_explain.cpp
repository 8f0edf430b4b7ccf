#include <doctest.h>

#include "macie/explain.hpp"

using namespace macie;

TEST_CASE("agent line states percentage and sign") {
  const auto concise = explain_agent(1, 5.333, 0.523, {}, 0, 0, Verbosity::concise);
  REQUIRE(concise.size() == 1);
  CHECK(concise[0].text == "Agent 2 contributed 52.3% to the outcome (Positive impact).");
  const auto neg = explain_agent(0, -8.333, -0.714, {}, 0, 0, Verbosity::concise);
  CHECK(neg[0].text == "Agent 1 contributed 71.4% to the outcome (Negative impact).");
}

TEST_CASE("detailed adds critical timesteps and full adds the interval") {
  const auto detailed = explain_agent(0, 4.867, 0.477, {3, 7}, 4.1, 5.2, Verbosity::detailed);
  REQUIRE(detailed.size() == 2);
  CHECK(detailed[1].text.find("timesteps 3, 7") != std::string::npos);
  CHECK(detailed[1].numbers == std::vector<double>{3, 7});
  const auto none = explain_agent(0, 4.867, 0.477, {}, 4.1, 5.2, Verbosity::detailed);
  CHECK(none[1].text == "Agent 1: no critical timesteps detected.");
  const auto full = explain_agent(0, 4.867, 0.477, {3, 7}, 4.1, 5.2, Verbosity::full);
  REQUIRE(full.size() == 3);
  CHECK(full[2].text == "Agent 1: phi = 4.867, 95% CI [4.100, 5.200].");
  CHECK(explain_agent(0, 1, 1, {}, 0, 2, Verbosity::full, 0.9)[2].text.find("90% CI") != std::string::npos);
}

TEST_CASE("property: verbosity levels nest") {
  const auto c = explain_agent(2, -1.0, -0.25, {1}, -2, 0, Verbosity::concise);
  const auto d = explain_agent(2, -1.0, -0.25, {1}, -2, 0, Verbosity::detailed);
  const auto f = explain_agent(2, -1.0, -0.25, {1}, -2, 0, Verbosity::full);
  CHECK(std::equal(c.begin(), c.end(), d.begin()));
  CHECK(std::equal(d.begin(), d.end(), f.begin()));
}

TEST_CASE("percent text matches the fraction at three decimals") {
  CHECK(percent_text(0.523) == "52.3");
  CHECK(percent_text(-0.714) == "71.4");
  CHECK(percent_text(1.0) == "100.0");
  CHECK(percent_text(0.0) == "0.0");
  CHECK(percent_text(0.0049) == "0.5");
  CHECK(percent_text(1.0 / 3.0) == "33.3");
}

TEST_CASE("emergence lines") {
  const auto pos = explain_emergence(0.461);
  REQUIRE(pos);
  CHECK(pos->text ==
        "Positive emergence detected: collective performance exceeds the sum of individual contributions "
        "(SI = 0.461).");
  CHECK_FALSE(explain_emergence(0.05, 0.1));
  const auto neg = explain_emergence(-1.0);
  REQUIRE(neg);
  CHECK(neg->kind == "interference");
  CHECK(neg->text.find("(SI = -1.000)") != std::string::npos);
}

TEST_CASE("interaction lines") {
  const auto lines = explain_interactions({{0, 1, 0.28}, {0, 1, -0.87}});
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].text == "Agents 1 and 2 exhibit positive synergy (cooperation) (sigma = 0.280).");
  CHECK(lines[1].text == "Agents 1 and 2 exhibit negative synergy (interference) (sigma = -0.870).");
  CHECK(explain_interactions({}).empty());
}

TEST_CASE("counterfactual lines") {
  CHECK(explain_counterfactual(1, 5.333, 7.688, 2.355).text ==
        "Counterfactual: Without agent 2, the outcome would change by -5.333 (from 7.688 to 2.355).");
  CHECK(explain_counterfactual(0, -8.333, 0.0, 8.333).text.find("change by 8.333 (from 0.000 to 8.333)") !=
        std::string::npos);
  CHECK(explain_counterfactual(0, 0.0, 1.0, 1.0).text.find("change by 0.000") != std::string::npos);
}

TEST_CASE("verbosity names and rendering") {
  for (auto v : {Verbosity::concise, Verbosity::detailed, Verbosity::full}) CHECK(verbosity_from_string(to_string(v)) == v);
  CHECK_THROWS_AS(verbosity_from_string("loud"), ConfigError);
  Explanation e{explain_interactions({{0, 1, 0.28}})};
  CHECK(e.render() == e.lines[0].text + "\n");
  CHECK(join_text({e.lines[0], e.lines[0]}) == e.lines[0].text + "\n" + e.lines[0].text);
}
