#pragma once

// Field-list JSON binding for configuration structs. A struct opts in by
// providing a free function
//   template <class V> void visit_fields(V& v, T& t) { v("name", t.member); ... }
// found by argument-dependent lookup. Nested structs recurse; unknown keys and
// wrongly typed values are rejected with the dotted key path.

#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "coplay/io/jsonl.hpp"

namespace coplay::io {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JsonOut;

template <class T>
concept HasFields = requires(JsonOut& v, T& t) { visit_fields(v, t); };

class JsonOut {
 public:
  Json json = Json::object();

  template <class T>
  void operator()(const char* name, T& value) {
    if constexpr (HasFields<T>) {
      JsonOut sub;
      visit_fields(sub, value);
      json[name] = std::move(sub.json);
    } else {
      json[name] = value;
    }
  }
};

class JsonIn {
 public:
  JsonIn(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <class T>
  void operator()(const char* name, T& value) {
    seen_.insert(name);
    if (!j_.contains(name)) return;
    const Json& x = j_.at(name);
    const std::string key = path_ + name;
    if constexpr (HasFields<T>) {
      JsonIn sub(x, key + ".");
      visit_fields(sub, value);
      sub.finish();
    } else {
      if constexpr (std::is_same_v<T, bool>) {
        if (!x.is_boolean()) throw ConfigError(key + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!x.is_number_integer()) throw ConfigError(key + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (x.is_number_integer() && !x.is_number_unsigned()) throw ConfigError(key + ": must be non-negative");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!x.is_number()) throw ConfigError(key + ": expected a number");
      }
      try {
        value = x.get<T>();
      } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
      }
    }
  }

  /// Rejects keys that no field claimed.
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + path_ + item.key() + "'");
    }
  }

 private:
  [[nodiscard]] std::string where() const { return path_.empty() ? "" : path_.substr(0, path_.size() - 1) + ": "; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <HasFields T>
Json fields_to_json(const T& value) {
  JsonOut out;
  T copy = value;
  visit_fields(out, copy);
  return out.json;
}

/// Overlays `j` onto `value` (missing keys keep their current values).
template <HasFields T>
void fields_from_json(const Json& j, T& value) {
  JsonIn in(j, "");
  visit_fields(in, value);
  in.finish();
}

/// Applies "a.b.c=value" to `j`. The value is parsed as JSON when possible
/// and taken as a string otherwise.
inline void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) throw ConfigError("override '" + key + "': '" + part + "' is not inside an object");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

}  // namespace coplay::io
