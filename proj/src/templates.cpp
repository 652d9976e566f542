#include "storyframe/templates.hpp"

#include <fstream>
#include <sstream>

namespace storyframe {

namespace detail {
const std::map<std::string, std::string>& builtin_template_sources();
}

namespace {

std::string trim_blank_lines(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  // Keep indentation of the first line.
  const auto line_start = text.rfind('\n', first);
  const auto begin = line_start == std::string::npos ? 0 : line_start + 1;
  return text.substr(begin, last - begin + 1);
}

std::optional<std::string> section_marker(const std::string& line) {
  if (line.size() < 3 || line.front() != '[' || line.back() != ']') return std::nullopt;
  const auto name = line.substr(1, line.size() - 2);
  for (char c : name) {
    if (!(c == '_' || (c >= 'A' && c <= 'Z'))) return std::nullopt;
  }
  return name;
}

std::vector<std::string> list_items(const std::string& text) {
  std::vector<std::string> items;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto item = trim_blank_lines(line);
    if (item.rfind("- ", 0) == 0) item = item.substr(2);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::string optional_section(const Template& tmpl, const std::string& name, const Vars& vars) {
  return tmpl.has(name) ? substitute(tmpl.section(name), vars) : "";
}

}  // namespace

const std::string& Template::section(const std::string& section_name) const {
  auto it = sections.find(section_name);
  if (it == sections.end()) {
    throw TemplateError("template '" + name + "' has no [" + section_name + "] section");
  }
  return it->second;
}

Template parse_template(const std::string& name, const std::string& text) {
  Template tmpl;
  tmpl.name = name;
  std::istringstream in(text);
  std::string line;
  std::string current;
  std::string body;
  bool in_header = true;
  auto flush = [&] {
    if (!current.empty()) tmpl.sections[current] = trim_blank_lines(body);
    body.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (auto marker = section_marker(line)) {
      in_header = false;
      flush();
      if (tmpl.sections.count(*marker)) {
        throw TemplateError("template '" + name + "' repeats section [" + *marker + "]");
      }
      current = *marker;
      continue;
    }
    if (in_header) {
      if (line.rfind("# version:", 0) == 0) {
        const auto value = line.substr(10);
        const auto first = value.find_first_not_of(" \t");
        const auto last = value.find_last_not_of(" \t");
        tmpl.version = first == std::string::npos ? "" : value.substr(first, last - first + 1);
      }
      if (line.empty() || line.front() == '#') continue;
      throw TemplateError("template '" + name + "' has text before the first section");
    }
    body += line;
    body += '\n';
  }
  flush();
  if (tmpl.version.empty()) throw TemplateError("template '" + name + "' lacks a version header");
  if (tmpl.sections.empty()) throw TemplateError("template '" + name + "' has no sections");
  return tmpl;
}

std::string substitute(const std::string& text, const Vars& vars) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string::npos) break;
    const auto key = text.substr(open + 2, close - open - 2);
    auto it = vars.find(key);
    if (it == vars.end()) throw TemplateError("no value for placeholder {{" + key + "}}");
    out.append(text, pos, open - pos);
    out += it->second;
    pos = close + 2;
  }
  out.append(text, pos, std::string::npos);
  return out;
}

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  for (const auto& [name, text] : detail::builtin_template_sources()) {
    set.templates_.emplace(name, parse_template(name, text));
  }
  return set;
}

TemplateSet TemplateSet::with_overrides(const std::filesystem::path& dir) {
  TemplateSet set = builtin();
  if (!std::filesystem::is_directory(dir)) {
    throw TemplateError("template directory not found: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".tmpl") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto name = entry.path().stem().string();
    set.templates_.insert_or_assign(name, parse_template(name, buf.str()));
  }
  return set;
}

const Template& TemplateSet::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw TemplateError("unknown template '" + name + "'");
  return it->second;
}

TiddEcPrompt make_tidd_ec(const Template& tmpl, const Vars& vars) {
  TiddEcPrompt p;
  p.task = optional_section(tmpl, "TASK", vars);
  p.instruction = list_items(optional_section(tmpl, "INSTRUCTION", vars));
  p.dos = list_items(optional_section(tmpl, "DO", vars));
  p.donts = list_items(optional_section(tmpl, "DONT", vars));
  auto input = optional_section(tmpl, "EXAMPLE_INPUT", vars);
  auto output = optional_section(tmpl, "EXAMPLE_OUTPUT", vars);
  if (!input.empty() || !output.empty()) p.example = {std::move(input), std::move(output)};
  p.content = optional_section(tmpl, "CONTENT", vars);
  return p;
}

std::string render_prompt(const TiddEcPrompt& p) {
  if (trim_blank_lines(p.task).empty()) throw EmptySection("task");
  if (trim_blank_lines(p.content).empty()) throw EmptySection("content");
  std::string out = "### Task\n" + p.task + "\n";
  if (!p.instruction.empty()) {
    out += "\n### Instruction\n";
    for (std::size_t i = 0; i < p.instruction.size(); ++i) {
      out += std::to_string(i + 1) + ". " + p.instruction[i] + "\n";
    }
  }
  if (!p.dos.empty()) {
    out += "\n### Do\n";
    for (const auto& item : p.dos) out += "- " + item + "\n";
  }
  if (!p.donts.empty()) {
    out += "\n### Don't\n";
    for (const auto& item : p.donts) out += "- " + item + "\n";
  }
  if (p.example) {
    out += "\n### Example\n";
    if (!p.example->first.empty()) out += "Input:\n" + p.example->first + "\n";
    if (!p.example->second.empty()) out += "Output:\n" + p.example->second + "\n";
  }
  out += "\n### Content\n" + p.content + "\n";
  return out;
}

}  // namespace storyframe
