#include "storyframe/judge.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace storyframe {

double round2(double value) { return std::round(value * 100.0) / 100.0; }

double EvaluationReport::dimension(std::string_view name) const {
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    if (kDimensions[i] == name) return dimensions[i];
  }
  throw std::invalid_argument("unknown dimension '" + std::string(name) + "'");
}

double EvaluationReport::mean() const {
  return std::accumulate(dimensions.begin(), dimensions.end(), 0.0) /
         static_cast<double>(dimensions.size());
}

Json to_json(const EvaluationReport& report, bool with_transcript) {
  Json dims = Json::object(), raw = Json::object();
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    const std::string name(kDimensions[i]);
    dims[name] = report.dimensions[i];
    raw[name] = report.raw_runs[i];
  }
  Json out = {{"dimensions", dims},
              {"raw_runs", raw},
              {"n_runs", report.n_runs},
              {"suggestion", report.suggestion}};
  if (with_transcript) out["transcript"] = to_json(report.transcript);
  return out;
}

EvaluationReport evaluation_report_from_json(const Json& doc) {
  EvaluationReport report;
  report.n_runs = doc.at("n_runs").get<int>();
  report.suggestion = doc.value("suggestion", "");
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    const std::string name(kDimensions[i]);
    report.dimensions[i] = doc.at("dimensions").at(name).get<double>();
    report.raw_runs[i] = doc.at("raw_runs").at(name).get<std::vector<int>>();
    const auto& runs = report.raw_runs[i];
    if (static_cast<int>(runs.size()) != report.n_runs || runs.empty()) {
      throw std::invalid_argument("raw_runs." + name + " does not hold n_runs scores");
    }
    const double mean = std::accumulate(runs.begin(), runs.end(), 0.0) / runs.size();
    if (std::abs(round2(mean) - report.dimensions[i]) > 1e-9) {
      throw std::invalid_argument("dimensions." + name + " is not the mean of its raw runs");
    }
  }
  return report;
}

std::string check_scores(const Json& value) {
  if (!value.is_object()) return "expected a JSON object of seven scores";
  std::ostringstream problems;
  for (auto dim : kDimensions) {
    const std::string name(dim);
    if (!value.contains(name)) {
      problems << "missing dimension " << name << "; ";
      continue;
    }
    const auto& v = value.at(name);
    if (!v.is_number_integer() || v.get<long>() < 1 || v.get<long>() > 5) {
      problems << name << " must be an integer from 1 to 5, got " << v.dump() << "; ";
    }
  }
  for (const auto& [key, v] : value.items()) {
    bool known = false;
    for (auto dim : kDimensions) known = known || dim == key;
    if (!known) problems << "unknown dimension " << key << "; ";
  }
  auto text = problems.str();
  if (text.size() >= 2) text.resize(text.size() - 2);
  return text;
}

std::string build_judge_prompt(const Pipeline& pipeline, const std::string& story,
                               const std::string& frame_json) {
  return render_prompt(make_tidd_ec(pipeline.templates().get("judge"),
                                    {{"story", story}, {"frame_json", frame_json}}));
}

EvaluationReport judge_story(const Pipeline& pipeline, const std::string& story,
                             const std::string& frame_json, const std::vector<ChatClient*>& judges,
                             int n_runs) {
  if (story.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw std::invalid_argument("story text is empty");
  }
  if (judges.empty() || n_runs < 1) throw std::invalid_argument("need at least one judge run");
  EvaluationReport report;
  const auto prompt = build_judge_prompt(pipeline, story, frame_json);
  for (ChatClient* judge : judges) {
    for (int run = 0; run < n_runs; ++run) {
      const auto scores = pipeline.request_json(*judge, "judge", prompt, check_scores, report.transcript);
      for (std::size_t i = 0; i < kDimensions.size(); ++i) {
        report.raw_runs[i].push_back(scores.at(std::string(kDimensions[i])).get<int>());
      }
      ++report.n_runs;
    }
  }
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    const auto& runs = report.raw_runs[i];
    report.dimensions[i] =
        round2(std::accumulate(runs.begin(), runs.end(), 0.0) / static_cast<double>(runs.size()));
  }

  Json scores = Json::object();
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    scores[std::string(kDimensions[i])] = report.dimensions[i];
  }
  const auto suggestion_prompt = render_prompt(make_tidd_ec(
      pipeline.templates().get("suggestion"), {{"story", story}, {"scores", scores.dump(2)}}));
  auto text = pipeline.call(*judges.front(), "suggestion", suggestion_prompt, 0, report.transcript);
  const auto first = text.find_first_not_of(" \t\r\n");
  const auto last = text.find_last_not_of(" \t\r\n");
  report.suggestion = first == std::string::npos ? "" : text.substr(first, last - first + 1);
  return report;
}

}  // namespace storyframe
