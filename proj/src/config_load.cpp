#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "envforge/config.hpp"

namespace envforge {
namespace fs = std::filesystem;

namespace {

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "/" + key;
}

bool numeric_chars(const std::string& s) {
  bool digit = false;
  for (char c : s) {
    if (c >= '0' && c <= '9') {
      digit = true;
    } else if (c != '+' && c != '-' && c != '.' && c != 'e' && c != 'E') {
      return false;
    }
  }
  return digit;
}

nlohmann::json scalar_value(const YAML::Node& n) {
  const std::string& s = n.Scalar();
  if (n.Tag() == "!") return s;  // quoted scalars stay strings
  if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  if (s == ".inf" || s == ".Inf" || s == "+.inf") return std::numeric_limits<double>::infinity();
  if (s == "-.inf" || s == "-.Inf") return -std::numeric_limits<double>::infinity();
  if (!numeric_chars(s)) return s;
  {
    const char* begin = s.data() + (s.front() == '+' ? 1 : 0);
    long long v = 0;
    auto [p, ec] = std::from_chars(begin, s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size()) return v;
  }
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (end == s.c_str() + s.size()) return d;
  return s;
}

class Loader {
 public:
  explicit Loader(LoadedConfig& out) : out_(out) {}

  YAML::Node parse_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open '" + file.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), file.string());
  }

  static YAML::Node parse_text(const std::string& text, const std::string& name) {
    try {
      return YAML::Load(text);
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::ParseError, name + ":" + std::to_string(e.mark.line + 1) + ":" +
                                             std::to_string(e.mark.column + 1) + ": " + e.msg);
    }
  }

  void push(const fs::path& file) { stack_.push_back(file); }
  void pop() { stack_.pop_back(); }

  nlohmann::json convert(const YAML::Node& n, const std::string& path, const std::string& file,
                         const fs::path& dir) {
    note(path, n, file);
    switch (n.Type()) {
      case YAML::NodeType::Null:
      case YAML::NodeType::Undefined:
        return nullptr;
      case YAML::NodeType::Scalar:
        return scalar_value(n);
      case YAML::NodeType::Sequence: {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& item : n) {
          if (is_include(item)) {
            splice(item, arr, path, file, dir);
          } else {
            arr.push_back(convert(item, join(path, std::to_string(arr.size())), file, dir));
          }
        }
        return arr;
      }
      case YAML::NodeType::Map: {
        nlohmann::json obj = nlohmann::json::object();
        for (const auto& kv : n) {
          if (!kv.first.IsScalar()) {
            throw Error(ErrorCode::ParseError, where(file, kv.first) + "mapping keys must be scalars");
          }
          const std::string key = kv.first.Scalar();
          if (obj.contains(key)) {
            throw Error(ErrorCode::ParseError, where(file, kv.first) + "duplicate key '" + key + "'");
          }
          obj[key] = convert(kv.second, join(path, key), file, dir);
          if (kv.second.IsNull()) note(join(path, key), kv.first, file);
        }
        return obj;
      }
    }
    return nullptr;
  }

 private:
  static bool is_include(const YAML::Node& item) {
    return item.IsMap() && item.size() == 1 && item["include"] && item["include"].IsScalar();
  }

  static std::string where(const std::string& file, const YAML::Node& n) {
    const auto m = n.Mark();
    if (m.line < 0) return file + ": ";
    return file + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
  }

  void note(const std::string& path, const YAML::Node& n, const std::string& file) {
    const auto m = n.Mark();
    if (m.line >= 0) out_.locations[path] = SourceLocation{file, m.line + 1, m.column + 1};
  }

  void splice(const YAML::Node& item, nlohmann::json& arr, const std::string& path, const std::string& file,
              const fs::path& dir) {
    const fs::path target = dir / item["include"].Scalar();
    std::error_code ec;
    if (!fs::is_regular_file(target, ec)) {
      throw Error(ErrorCode::FileNotFound, where(file, item) + "included file '" + target.string() + "' not found");
    }
    const fs::path canon = fs::weakly_canonical(target);
    if (std::find(stack_.begin(), stack_.end(), canon) != stack_.end()) {
      std::string chain;
      for (const auto& f : stack_) chain += f.filename().string() + " -> ";
      throw Error(ErrorCode::IncludeCycle, where(file, item) + "include cycle: " + chain + canon.filename().string());
    }
    const YAML::Node root = parse_file(target);
    const std::string inc_file = target.string();
    const fs::path inc_dir = target.parent_path();
    push(canon);
    if (root.IsSequence()) {
      for (const auto& sub : root) {
        if (is_include(sub)) {
          splice(sub, arr, path, inc_file, inc_dir);
        } else {
          arr.push_back(convert(sub, join(path, std::to_string(arr.size())), inc_file, inc_dir));
        }
      }
    } else if (!root.IsNull()) {
      arr.push_back(convert(root, join(path, std::to_string(arr.size())), inc_file, inc_dir));
    }
    pop();
  }

  LoadedConfig& out_;
  std::vector<fs::path> stack_;
};

}  // namespace

std::optional<SourceLocation> LoadedConfig::locate(const std::string& path) const {
  std::string p = path;
  while (true) {
    if (auto it = locations.find(p); it != locations.end()) return it->second;
    if (p.empty()) return std::nullopt;
    const auto slash = p.rfind('/');
    p = slash == std::string::npos ? std::string() : p.substr(0, slash);
  }
}

LoadedConfig load_config(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, "config file '" + path.string() + "' not found");
  }
  LoadedConfig out;
  out.file = path;
  out.base_dir = path.parent_path();
  Loader loader(out);
  const YAML::Node root = loader.parse_file(path);
  loader.push(fs::weakly_canonical(path));
  out.tree = loader.convert(root, "", path.string(), path.parent_path());
  return out;
}

LoadedConfig parse_config(const std::string& text, const fs::path& base_dir, const std::string& display_name) {
  LoadedConfig out;
  Loader loader(out);
  const YAML::Node root = Loader::parse_text(text, display_name);
  out.base_dir = base_dir;
  out.tree = loader.convert(root, "", display_name, base_dir);
  return out;
}

}  // namespace envforge
