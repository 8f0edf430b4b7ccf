#include "macie/episode_log.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "macie/format.hpp"

namespace macie {

namespace {

template <class T>
void write_csv(std::ostream& out, const std::vector<T>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    if constexpr (std::is_floating_point_v<T>) {
      out << shortest(values[i]);
    } else {
      out << values[i];
    }
  }
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  return parts;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error("episode log line " + std::to_string(line) + ": " + what);
}

template <class T>
T parse_number(const std::string& text, std::size_t line) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) fail(line, "bad number '" + text + "'");
  return value;
}

template <class T>
std::vector<T> parse_csv(const std::string& text, std::size_t line) {
  std::vector<T> values;
  if (text.empty()) return values;
  for (const std::string& part : split(text, ',')) values.push_back(parse_number<T>(part, line));
  return values;
}

std::string header_value(const std::string& field, const std::string& key, std::size_t line) {
  const std::string prefix = key + "=";
  if (field.rfind(prefix, 0) != 0) fail(line, "expected header field '" + key + "'");
  return field.substr(prefix.size());
}

}  // namespace

void write_episode_log(std::ostream& out, const History& history) {
  out << "#macie-log v1\tenv=" << history.env_name << "\tN=" << history.num_agents
      << "\tT=" << history.horizon << "\tfeatures=";
  for (std::size_t i = 0; i < history.feature_layout.size(); ++i) {
    if (i) out << ',';
    out << history.feature_layout[i];
  }
  out << '\n';
  for (const Episode& ep : history.episodes) {
    out << "episode\t" << ep.seed << '\t' << (ep.terminated ? 1 : 0) << '\n';
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const Step& s = ep.steps[t];
      out << t << '\t';
      write_csv(out, s.state);
      out << '\t';
      write_csv(out, s.joint_action);
      out << '\t';
      write_csv(out, s.rewards);
      out << ',' << shortest(s.team_reward) << '\n';
    }
    if (!ep.final_state.empty()) {
      out << ep.steps.size() << '\t';
      write_csv(out, ep.final_state);
      out << "\t\t\n";
    }
  }
}

History read_episode_log(std::istream& in) {
  History history;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw Error("episode log is empty");
  {
    const auto fields = split(line, '\t');
    if (fields.size() != 5 || fields[0] != "#macie-log v1") fail(line_no, "bad header");
    history.env_name = header_value(fields[1], "env", line_no);
    history.num_agents = parse_number<std::size_t>(header_value(fields[2], "N", line_no), line_no);
    history.horizon = parse_number<int>(header_value(fields[3], "T", line_no), line_no);
    const std::string features = header_value(fields[4], "features", line_no);
    if (!features.empty()) history.feature_layout = split(features, ',');
    if (history.num_agents < 2) fail(line_no, "need at least two agents");
    if (history.horizon < 1) fail(line_no, "horizon must be positive");
  }
  const std::size_t n = history.num_agents;
  const std::size_t dim = history.feature_layout.size();
  Episode* current = nullptr;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields[0] == "episode") {
      if (fields.size() != 3) fail(line_no, "bad episode record");
      Episode& ep = history.episodes.emplace_back();
      ep.env_name = history.env_name;
      ep.horizon = history.horizon;
      ep.seed = parse_number<std::uint64_t>(fields[1], line_no);
      ep.terminated = parse_number<int>(fields[2], line_no) != 0;
      current = &ep;
      continue;
    }
    if (current == nullptr) fail(line_no, "step record before any episode record");
    if (fields.size() != 4) fail(line_no, "expected 4 tab-separated fields");
    if (!current->final_state.empty()) fail(line_no, "record after final state");
    const auto t = parse_number<std::size_t>(fields[0], line_no);
    if (t != current->steps.size()) fail(line_no, "timestep out of sequence");
    auto state = parse_csv<double>(fields[1], line_no);
    if (state.size() != dim) fail(line_no, "state length does not match feature layout");
    if (fields[2].empty() && fields[3].empty()) {
      current->final_state = std::move(state);
      continue;
    }
    Step step;
    step.state = std::move(state);
    step.joint_action = parse_csv<ActionId>(fields[2], line_no);
    auto rewards = parse_csv<double>(fields[3], line_no);
    if (step.joint_action.size() != n) fail(line_no, "action count does not match N");
    if (rewards.size() != n + 1) fail(line_no, "expected N agent rewards plus team reward");
    step.team_reward = rewards.back();
    rewards.pop_back();
    step.rewards = std::move(rewards);
    if (static_cast<int>(current->steps.size()) >= history.horizon) {
      fail(line_no, "episode longer than horizon");
    }
    current->steps.push_back(std::move(step));
  }
  for (const Episode& ep : history.episodes) {
    if (ep.steps.empty()) throw Error("episode log contains an episode with no steps");
  }
  return history;
}

void save_episode_log(const std::string& path, const History& history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_episode_log(out, history);
  if (!out) throw Error("failed writing '" + path + "'");
}

History load_episode_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_episode_log(in);
}

}  // namespace macie
