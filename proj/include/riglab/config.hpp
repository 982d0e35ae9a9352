#pragma once

// Reader for the experiment description files: a TOML subset covering
// [section.sub] headers, string / number / boolean scalars and nested
// arrays, plus builders that turn a parsed file into experiment inputs.

#include <map>
#include <string>
#include <vector>

#include "riglab/experiment.hpp"

namespace riglab::config {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct TomlValue {
  enum class Kind { String, Number, Boolean, Array };
  Kind kind = Kind::Number;
  std::string str;
  double num = 0.0;
  bool boolean = false;
  std::vector<TomlValue> items;
};

class Toml {
 public:
  static Toml parse_file(const std::string& path);
  static Toml parse_text(const std::string& text, const std::string& origin = "<inline>");

  bool has(const std::string& dotted_key) const;
  const TomlValue& at(const std::string& dotted_key) const;
  std::string get_string(const std::string& key) const;
  double get_number(const std::string& key) const;
  long long get_integer(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::vector<TomlValue>& get_array(const std::string& key) const;
  std::string get_string_or(const std::string& key, const std::string& fallback) const;
  double get_number_or(const std::string& key, double fallback) const;
  long long get_integer_or(const std::string& key, long long fallback) const;

 private:
  std::map<std::string, TomlValue> values_;
  std::string origin_;
};

ManifoldSpec manifold_from(const Toml& toml);
expr::HamiltonianSequence sequence_from(const Toml& toml, const std::string& section,
                                        const ManifoldSpec& m);
experiment::RigidityExperiment experiment_from(const Toml& toml);

}  // namespace riglab::config
