#pragma once

// Role prompt templates loaded from versioned text files. Placeholders are
// written {{name}}; rendering fails if any placeholder is left unfilled.

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>

#include "mentra/error.hpp"

#ifndef MENTRA_PROMPT_DIR
#define MENTRA_PROMPT_DIR "prompts/v1"
#endif

namespace mentra {

using PromptVars = std::map<std::string, std::string>;

inline std::string fill_template(std::string_view tmpl, const PromptVars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw Error(Errc::ConfigError, "unterminated placeholder in template");
    const std::string key(tmpl.substr(open + 2, close - open - 2));
    const auto it = vars.find(key);
    if (it == vars.end()) throw Error(Errc::ConfigError, "template placeholder {{" + key + "}} has no value");
    out.append(it->second);
    i = close + 2;
  }
  return out;
}

class PromptLibrary {
 public:
  explicit PromptLibrary(std::filesystem::path dir = MENTRA_PROMPT_DIR) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const noexcept { return dir_; }

  const std::string& get(const std::string& name) {
    std::lock_guard lock(mu_);
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    const auto path = dir_ / (name + ".txt");
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "prompt template not found: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return cache_.emplace(name, ss.str()).first->second;
  }

  std::string render(const std::string& name, const PromptVars& vars) { return fill_template(get(name), vars); }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, std::string> cache_;
};

}  // namespace mentra
