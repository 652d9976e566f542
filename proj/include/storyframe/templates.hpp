#pragma once

// Prompt templates and TIDD-EC rendering.
//
// A template file is plain text. Leading `# key: value` lines are header
// metadata (`version` is required). Each section starts with a marker line
// such as `[TASK]` and runs to the next marker. The TIDD-EC sections are
// TASK, INSTRUCTION, DO, DONT, EXAMPLE_INPUT, EXAMPLE_OUTPUT and CONTENT;
// INSTRUCTION, DO and DONT hold one item per line. Other section names
// (TEXT, PREVIOUS, ...) are free text. `{{name}}` placeholders are filled
// in a single pass, so substituted values are never re-expanded.

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace storyframe {

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySection : public std::runtime_error {
 public:
  explicit EmptySection(const std::string& section)
      : std::runtime_error("EmptySection: " + section), section_(section) {}
  const std::string& section() const { return section_; }

 private:
  std::string section_;
};

struct Template {
  std::string name;
  std::string version;
  std::map<std::string, std::string> sections;

  bool has(const std::string& section) const { return sections.count(section) > 0; }
  // Throws TemplateError when the section is missing.
  const std::string& section(const std::string& name) const;
};

Template parse_template(const std::string& name, const std::string& text);

using Vars = std::map<std::string, std::string>;

// Throws TemplateError on a placeholder with no value.
std::string substitute(const std::string& text, const Vars& vars);

class TemplateSet {
 public:
  // The templates compiled into the library.
  static TemplateSet builtin();
  // Built-in templates overridden by every *.tmpl file in `dir`.
  static TemplateSet with_overrides(const std::filesystem::path& dir);

  const Template& get(const std::string& name) const;
  const std::map<std::string, Template>& all() const { return templates_; }

 private:
  std::map<std::string, Template> templates_;
};

struct TiddEcPrompt {
  std::string task;
  std::vector<std::string> instruction;
  std::vector<std::string> dos;
  std::vector<std::string> donts;
  std::optional<std::pair<std::string, std::string>> example;  // input, output
  std::string content;
};

// Fills a TIDD-EC template. Missing optional sections stay empty.
TiddEcPrompt make_tidd_ec(const Template& tmpl, const Vars& vars);

// Sections in the fixed order Task, Instruction, Do, Don't, Example,
// Content. Empty optional sections are omitted; an empty task or content
// throws EmptySection.
std::string render_prompt(const TiddEcPrompt& prompt);

}  // namespace storyframe
