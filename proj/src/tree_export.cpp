#include "skillopt/tree_export.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "skillopt/errors.hpp"

namespace skillopt {

using nlohmann::json;

namespace {

std::string fixed4(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

std::string dot_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out.append("\\n");
      continue;
    }
    out.push_back(c);
  }
  return out;
}

struct NodeView {
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::string action;
  std::size_t visits = 0;
  double mean_reward = 0.0;
  double reward = 0.0;
};

struct TreeView {
  NodeId root = 0;
  NodeId best = 0;
  std::vector<NodeId> path;
  std::vector<NodeView> nodes;
};

std::string render_dot(const TreeView& view) {
  std::set<NodeId> on_path(view.path.begin(), view.path.end());
  std::ostringstream out;
  out << "digraph search_tree {\n  rankdir=TB;\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (const auto& n : view.nodes) {
    std::ostringstream label;
    label << "#" << n.id << " " << (n.parent ? n.action : "(seed)") << "\\n"
          << "r=" << fixed4(n.reward) << " Q=" << fixed4(n.mean_reward)
          << " N=" << n.visits;
    out << "  n" << n.id << " [label=\"" << label.str() << "\"";
    if (on_path.count(n.id)) {
      out << ", color=\"mediumblue\", penwidth=2.0";
      if (n.id == view.best) out << ", peripheries=2";
    } else {
      out << ", color=\"gray70\", fontcolor=\"gray40\"";
    }
    out << "];\n";
  }
  for (const auto& n : view.nodes) {
    if (!n.parent) continue;
    const bool highlight = on_path.count(n.id) && on_path.count(*n.parent);
    out << "  n" << *n.parent << " -> n" << n.id;
    if (highlight) {
      out << " [color=\"mediumblue\", penwidth=2.0]";
    } else {
      out << " [color=\"gray70\"]";
    }
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace

std::vector<NodeId> best_path(const SearchTree& tree) {
  if (tree.nodes.empty()) raise(errc::empty_tree, "no nodes to trace");
  std::vector<NodeId> path;
  NodeId id = tree.best_id;
  while (true) {
    path.push_back(id);
    const SearchNode& n = tree.node(id);
    if (!n.parent) break;
    id = *n.parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

json tree_to_json(const SearchTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    json entry = {
        {"id", n.id},
        {"parent", n.parent ? json(*n.parent) : json(nullptr)},
        {"action", n.parent ? actions_label(n.producing_actions) : ""},
        {"visits", n.visit_count},
        {"mean_reward", n.mean_reward},
        {"reward", n.reward_at_creation},
        {"children", n.children},
    };
    nodes.push_back(std::move(entry));
  }
  return json{{"schema_version", 1},
              {"root", tree.root_id},
              {"best", tree.best_id},
              {"best_path", best_path(tree)},
              {"nodes", std::move(nodes)}};
}

std::string tree_to_dot(const SearchTree& tree) {
  TreeView view;
  view.root = tree.root_id;
  view.best = tree.best_id;
  view.path = best_path(tree);
  for (const auto& n : tree.nodes) {
    NodeView v;
    v.id = n.id;
    v.parent = n.parent;
    v.action = dot_escape(actions_label(n.producing_actions));
    v.visits = n.visit_count;
    v.mean_reward = n.mean_reward;
    v.reward = n.reward_at_creation;
    view.nodes.push_back(std::move(v));
  }
  return render_dot(view);
}

std::string tree_json_to_dot(const json& tree) {
  TreeView view;
  try {
    view.root = tree.at("root").get<NodeId>();
    view.best = tree.at("best").get<NodeId>();
    view.path = tree.at("best_path").get<std::vector<NodeId>>();
    for (const auto& n : tree.at("nodes")) {
      NodeView v;
      v.id = n.at("id").get<NodeId>();
      if (!n.at("parent").is_null()) v.parent = n.at("parent").get<NodeId>();
      v.action = dot_escape(n.at("action").get<std::string>());
      v.visits = n.at("visits").get<std::size_t>();
      v.mean_reward = n.at("mean_reward").get<double>();
      v.reward = n.at("reward").get<double>();
      view.nodes.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    raise(errc::bad_manifest, std::string("tree export is malformed: ") + e.what());
  }
  return render_dot(view);
}

json round_record_to_json(const RoundRecord& record) {
  json attempts = json::array();
  for (const auto& a : record.attempts) {
    attempts.push_back({
        {"attempt", a.attempt_index},
        {"deltas", a.deltas},
        {"mean_delta", a.mean_delta},
        {"sample_sd", a.sample_sd},
        {"lcb", a.lcb},
        {"gate_passed", a.gate_passed},
        {"confidence", a.confidence},
        {"reward", a.reward},
        {"has_content", a.has_content},
        {"content_digest", a.content_digest},
    });
  }
  return json{{"round", record.round},
              {"selected", record.selected},
              {"accepted", record.accepted},
              {"action", record.action_label},
              {"reject_reason", record.reject_reason},
              {"reject_message", record.reject_message},
              {"new_node", record.new_node},
              {"reward", record.reward},
              {"best_reward", record.best_reward_after},
              {"stale_rounds", record.stale_rounds_after},
              {"attempts", std::move(attempts)}};
}

std::string round_log_to_jsonl(const std::vector<RoundRecord>& log) {
  std::string out;
  for (const auto& record : log) {
    out += round_record_to_json(record).dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace skillopt
