#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "skillopt/outer_search.hpp"

namespace skillopt {

// Node ids from the root to the best node, inclusive.
std::vector<NodeId> best_path(const SearchTree& tree);

// Structured export (schema_version 1): root, best, best_path and one entry
// per node with parent link, producing action label, visits, mean reward and
// creation reward.
nlohmann::json tree_to_json(const SearchTree& tree);

// Graphviz rendering with the root-to-best path highlighted and everything
// else faded.
std::string tree_to_dot(const SearchTree& tree);
std::string tree_json_to_dot(const nlohmann::json& tree);

nlohmann::json round_record_to_json(const RoundRecord& record);
std::string round_log_to_jsonl(const std::vector<RoundRecord>& log);

}  // namespace skillopt
