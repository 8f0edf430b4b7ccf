#pragma once

#include <iosfwd>
#include <string>

#include "macie/core.hpp"

namespace macie {

// Line-oriented, tab-separated episode log.
//
//   #macie-log v1 <TAB> env=<name> <TAB> N=<agents> <TAB> T=<horizon> <TAB> features=<f0,f1,...>
//   episode <TAB> <seed> <TAB> <terminated 0|1>
//   <t> <TAB> <state_csv> <TAB> <action_csv> <TAB> <reward_csv>
//   ...
//   <t> <TAB> <final_state_csv> <TAB> <TAB>
//
// reward_csv holds the N per-agent rewards followed by the team reward. The optional
// last record of an episode, with empty action and reward fields, is the state reached
// after the final step. Reals are written in shortest round-trip form, so reading back
// a written log reproduces the History exactly.
void write_episode_log(std::ostream& out, const History& history);
History read_episode_log(std::istream& in);

void save_episode_log(const std::string& path, const History& history);
History load_episode_log(const std::string& path);

}  // namespace macie
