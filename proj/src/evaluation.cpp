#include "skillopt/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "skillopt/digest.hpp"
#include "skillopt/errors.hpp"
#include "skillopt/package_io.hpp"
#include "skillopt/rng.hpp"
#include "text_util.hpp"

namespace skillopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

json instance_to_json(const TaskInstance& inst) {
  json opts = json::object();
  for (const auto& [label, text] : inst.options) opts[label] = text;
  return json{{"id", inst.id},
              {"context", inst.context},
              {"question", inst.question},
              {"options", opts},
              {"answer", inst.answer}};
}

TaskInstance instance_from_json(const json& j) {
  TaskInstance inst;
  inst.id = j.at("id").get<std::string>();
  inst.context = j.value("context", "");
  inst.question = j.at("question").get<std::string>();
  const auto& opts = j.at("options");
  if (opts.is_object()) {
    for (auto it = opts.begin(); it != opts.end(); ++it) {
      inst.options.emplace_back(it.key(), it.value().get<std::string>());
    }
  } else {
    for (const auto& pair : opts) {
      inst.options.emplace_back(pair.at(0).get<std::string>(),
                                pair.at(1).get<std::string>());
    }
  }
  inst.answer = j.at("answer").get<std::string>();
  return inst;
}

std::string question_type(const TaskInstance& inst) {
  std::string text = inst.question;
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (text.find("objective") != std::string::npos) return "objective";
  if (text.find("constraint") != std::string::npos) return "constraint";
  if (text.find("variable") != std::string::npos) return "variable";
  if (text.find("parameter") != std::string::npos) return "parameter";
  return "other";
}

}  // namespace

SubprocessRunner::SubprocessRunner(std::string command) : command_(std::move(command)) {}

std::string SubprocessRunner::run(const SkillPackage& candidate,
                                  const TaskInstance& instance) {
  const fs::path base = fs::temp_directory_path() /
                        ("skillopt-run-" + hex_digest(instance.id + "#" +
                                                      std::to_string(counter_++)));
  const fs::path pkg_dir = base / "package";
  const fs::path inst_file = base / "instance.json";
  write_directory(pkg_dir, serialize_package(candidate));
  write_file(inst_file, instance_to_json(instance).dump(2) + "\n");

  const std::string cmd =
      command_ + " " + shell_quote(pkg_dir.string()) + " " +
      shell_quote(inst_file.string());
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    std::error_code ec;
    fs::remove_all(base, ec);
    raise(errc::runner_failure, "cannot start runner: " + command_);
  }
  std::string output;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  const int status = ::pclose(pipe);
  std::error_code ec;
  fs::remove_all(base, ec);
  if (status != 0) {
    raise(errc::runner_failure,
          "runner exited with status " + std::to_string(status) + " for instance " +
              instance.id);
  }
  return output;
}

std::vector<TaskInstance> load_dataset_jsonl(const fs::path& file) {
  const std::string text = read_file(file);
  std::vector<TaskInstance> out;
  for (const auto& line : detail::split_lines(text)) {
    if (detail::is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      raise(errc::io_error, "bad JSONL line in " + file.string() + ": " + e.what());
    }
    try {
      out.push_back(instance_from_json(j));
    } catch (const json::exception& e) {
      raise(errc::io_error, "bad instance in " + file.string() + ": " + e.what());
    }
  }
  return out;
}

SplitSet load_splits(const std::vector<TaskInstance>& dataset,
                     const std::array<std::size_t, 3>& sizes, std::uint64_t seed) {
  std::set<std::string> ids;
  for (const auto& inst : dataset) {
    if (!ids.insert(inst.id).second) {
      raise(errc::id_mismatch, "duplicate instance id '" + inst.id + "'");
    }
  }
  const std::size_t need = sizes[0] + sizes[1] + sizes[2];
  if (dataset.size() < need) {
    raise(errc::insufficient_data,
          "dataset has " + std::to_string(dataset.size()) + " instances, splits need " +
              std::to_string(need));
  }
  std::vector<TaskInstance> pool = dataset;
  std::mt19937_64 rng(seed);
  for (std::size_t i = pool.size() - 1; i > 0; --i) {
    const std::size_t j = uniform_index(rng, i + 1);
    std::swap(pool[i], pool[j]);
  }
  SplitSet splits;
  splits.sampling_seed = seed;
  splits.search.assign(pool.begin(), pool.begin() + sizes[0]);
  splits.confirm.assign(pool.begin() + sizes[0], pool.begin() + sizes[0] + sizes[1]);
  splits.test.assign(pool.begin() + sizes[0] + sizes[1], pool.begin() + need);
  return splits;
}

double exact_match_score(
    const std::vector<std::pair<std::string, std::string>>& predictions,
    const std::vector<std::pair<std::string, std::string>>& gold) {
  if (gold.empty()) raise(errc::empty_instance_set, "no gold labels to score against");
  std::map<std::string, std::string> by_id;
  for (const auto& [id, label] : predictions) by_id[id] = label;
  if (by_id.size() != predictions.size() || predictions.size() != gold.size()) {
    raise(errc::id_mismatch, "predictions do not cover the gold ids exactly");
  }
  std::size_t correct = 0;
  for (const auto& [id, answer] : gold) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      raise(errc::id_mismatch, "missing prediction for id '" + id + "'");
    }
    if (it->second == answer) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

std::optional<std::string> extract_answer_label(
    const std::string& raw,
    const std::vector<std::pair<std::string, std::string>>& options) {
  const auto lines = detail::split_lines(raw);
  std::string last;
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (!detail::is_blank(*it)) {
      last = *it;
      break;
    }
  }
  if (last.empty()) return std::nullopt;
  std::istringstream words(last);
  std::string token;
  while (words >> token) {
    std::size_t begin = 0;
    std::size_t end = token.size();
    while (begin < end && !std::isalnum(static_cast<unsigned char>(token[begin]))) {
      ++begin;
    }
    while (end > begin && !std::isalnum(static_cast<unsigned char>(token[end - 1]))) {
      --end;
    }
    const std::string bare = token.substr(begin, end - begin);
    if (bare.empty()) continue;
    for (const auto& [label, _] : options) {
      if (bare == label) return label;
    }
  }
  return std::nullopt;
}

EvalReport evaluate_skill(const SkillPackage& candidate,
                          const std::vector<TaskInstance>& instances,
                          AgentRunner& runner, int retries) {
  if (instances.empty()) raise(errc::empty_instance_set, "no instances to evaluate");
  EvalReport report;
  std::map<std::string, std::size_t> wrong_by_type;
  std::size_t unparseable = 0;
  std::size_t correct = 0;

  for (const auto& inst : instances) {
    std::string output;
    for (int attempt = 0;; ++attempt) {
      try {
        output = runner.run(candidate, inst);
        break;
      } catch (const Error& e) {
        if (e.code() != errc::runner_failure || attempt >= retries) throw;
      }
    }
    InstanceResult result;
    result.id = inst.id;
    result.output_digest = hex_digest(output);
    if (const auto label = extract_answer_label(output, inst.options)) {
      result.predicted = *label;
      result.correct = *label == inst.answer;
    } else {
      result.parseable = false;
      result.correct = false;
      ++unparseable;
    }
    if (result.correct) {
      ++correct;
    } else {
      ++wrong_by_type[question_type(inst)];
    }
    report.per_instance.push_back(std::move(result));
  }

  std::sort(report.per_instance.begin(), report.per_instance.end(),
            [](const InstanceResult& a, const InstanceResult& b) { return a.id < b.id; });
  report.reward = static_cast<double>(correct) / static_cast<double>(instances.size());

  std::ostringstream diag;
  diag << correct << "/" << instances.size() << " correct";
  if (!wrong_by_type.empty()) {
    diag << "; errors by question type:";
    for (const auto& [type, count] : wrong_by_type) {
      diag << " " << type << "=" << count;
    }
  }
  if (unparseable > 0) {
    diag << "; unparseable outputs: " << unparseable;
  }
  report.diagnostics = diag.str().substr(0, 2000);
  return report;
}

SyntheticLandscape load_landscape(const fs::path& file) {
  json j;
  try {
    j = json::parse(read_file(file));
  } catch (const json::exception& e) {
    raise(errc::io_error, "bad landscape JSON in " + file.string() + ": " + e.what());
  }
  SyntheticLandscape ls;
  ls.base_reward = j.value("base_reward", 0.5);
  ls.noise_sd = j.value("noise_sd", 0.0);
  ls.rng_seed = j.value("rng_seed", std::uint64_t{0});
  if (j.contains("bonuses")) {
    for (const auto& b : j.at("bonuses")) {
      ls.bonuses.emplace_back(b.at("predicate").get<std::string>(),
                              b.at("bonus").get<double>());
    }
  }
  return ls;
}

bool eval_predicate(const std::string& predicate, const Structure& structure,
                    const ContentState& content) {
  const auto colon = predicate.find(':');
  const auto equals = predicate.find('=');
  if (colon != std::string::npos && (equals == std::string::npos || colon < equals)) {
    const std::string head = predicate.substr(0, colon);
    const std::string arg = predicate.substr(colon + 1);
    if (head == "has_section") return structure.has_section(arg);
    if (head == "has_reference") return structure.has_reference(arg);
    if (head == "has_script") return structure.has_script(arg);
    if (head == "has_asset") return structure.has_asset(arg);
    if (head == "has_metadata_key") return structure.has_key(arg);
    if (head == "body_contains") {
      for (const auto& [_, body] : content.section_bodies) {
        if (body.find(arg) != std::string::npos) return true;
      }
      return false;
    }
    if (head == "description_contains") {
      return content.frontmatter.description.find(arg) != std::string::npos;
    }
  } else if (equals != std::string::npos) {
    const std::string head = predicate.substr(0, equals);
    std::size_t want = 0;
    try {
      want = std::stoul(predicate.substr(equals + 1));
    } catch (const std::exception&) {
      raise(errc::domain_error, "bad count in predicate '" + predicate + "'");
    }
    if (head == "section_count") {
      std::size_t named = 0;
      for (const auto& h : structure.section_headings) {
        if (!h.empty()) ++named;
      }
      return named == want;
    }
    if (head == "reference_count") return structure.reference_paths.size() == want;
    if (head == "script_count") return structure.script_paths.size() == want;
    if (head == "asset_count") return structure.asset_paths.size() == want;
  }
  raise(errc::domain_error, "unknown predicate '" + predicate + "'");
}

double synth_evaluate(const Structure& structure, const ContentState& content,
                      const SyntheticLandscape& landscape, std::int64_t draw_index) {
  double reward = landscape.base_reward;
  for (const auto& [predicate, bonus] : landscape.bonuses) {
    if (eval_predicate(predicate, structure, content)) reward += bonus;
  }
  if (landscape.noise_sd > 0.0) {
    std::mt19937_64 rng(splitmix64(
        landscape.rng_seed ^ splitmix64(static_cast<std::uint64_t>(draw_index))));
    reward += landscape.noise_sd * gaussian(rng);
  }
  return std::clamp(reward, 0.0, 1.0);
}

SyntheticEvaluator::SyntheticEvaluator(SyntheticLandscape landscape,
                                       std::int64_t draw_offset)
    : landscape_(std::move(landscape)), draw_offset_(draw_offset) {}

EvalOutcome SyntheticEvaluator::evaluate(const Structure& structure,
                                         const ContentState& content,
                                         std::int64_t draw_index) {
  EvalOutcome out;
  out.reward = synth_evaluate(structure, content, landscape_, draw_offset_ + draw_index);
  std::size_t met = 0;
  std::vector<std::string> unmet;
  for (const auto& [predicate, _] : landscape_.bonuses) {
    if (eval_predicate(predicate, structure, content)) {
      ++met;
    } else if (unmet.size() < 8) {
      unmet.push_back(predicate);
    }
  }
  std::ostringstream diag;
  diag << "bonus predicates satisfied: " << met << "/" << landscape_.bonuses.size();
  if (!unmet.empty()) diag << "; unmet: " << detail::join(unmet, ", ");
  out.diagnostics = diag.str();
  return out;
}

ExactMatchEvaluator::ExactMatchEvaluator(std::vector<TaskInstance> instances,
                                         std::shared_ptr<AgentRunner> runner)
    : instances_(std::move(instances)), runner_(std::move(runner)) {}

EvalOutcome ExactMatchEvaluator::evaluate(const Structure& structure,
                                          const ContentState& content,
                                          std::int64_t /*draw_index*/) {
  const SkillPackage pkg = recompose(content, structure);
  try {
    const EvalReport report = evaluate_skill(pkg, instances_, *runner_);
    return {report.reward, report.diagnostics};
  } catch (const Error& e) {
    if (e.code() == errc::runner_failure) {
      raise(errc::evaluator_failure, e.what());
    }
    throw;
  }
}

}  // namespace skillopt
