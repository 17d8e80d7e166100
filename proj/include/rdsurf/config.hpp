#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rdsurf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key-value text format with [section] headers; order preserving so
// parse -> serialize -> parse is the identity.
class Config {
 public:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };

  void set(const std::string& section, const std::string& key,
           const std::string& value);
  bool has(const std::string& section, const std::string& key) const;
  const std::string& get(const std::string& section,
                         const std::string& key) const;  // throws if absent
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const;
  int get_int(const std::string& section, const std::string& key) const;
  int get_int_or(const std::string& section, const std::string& key,
                 int fallback) const;

  const std::vector<Section>& sections() const { return sections_; }

 private:
  std::vector<Section> sections_;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);
std::string serialize_config(const Config& config);
void save_config(const Config& config, const std::string& path);

}  // namespace rdsurf
