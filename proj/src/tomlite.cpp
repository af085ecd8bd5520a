#include "srmtl/tomlite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "srmtl/errors.hpp"

namespace srmtl {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// strips an unquoted '#' comment
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool parse_number(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

TomlTable TomlTable::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

TomlTable TomlTable::parse(const std::string& text, const std::string& origin) {
  TomlTable table;
  table.origin_ = origin;

  std::istringstream lines(text);
  std::string raw, section;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw SchemaViolation(origin + ":" + std::to_string(lineno) + ": " + why);
  };

  while (std::getline(lines, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated table header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail("empty table name");
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string rhs = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (rhs.empty()) fail("empty value for key '" + key + "'");

    Value v;
    if (rhs.front() == '"') {
      if (rhs.size() < 2 || rhs.back() != '"') fail("unterminated string");
      v.kind = Value::Kind::String;
      v.str = rhs.substr(1, rhs.size() - 2);
    } else if (rhs == "true" || rhs == "false") {
      v.kind = Value::Kind::Boolean;
      v.boolean = (rhs == "true");
    } else if (rhs.front() == '[') {
      if (rhs.back() != ']') fail("unterminated array (arrays must fit on one line)");
      const std::string body = trim(rhs.substr(1, rhs.size() - 2));
      std::vector<std::string> items;
      std::string cur;
      bool in_string = false;
      for (char ch : body) {
        if (ch == '"') in_string = !in_string;
        if (ch == ',' && !in_string) {
          items.push_back(trim(cur));
          cur.clear();
        } else {
          cur += ch;
        }
      }
      if (!trim(cur).empty()) items.push_back(trim(cur));
      const bool strings = !items.empty() && items.front().front() == '"';
      v.kind = strings ? Value::Kind::StringArray : Value::Kind::NumberArray;
      for (const std::string& item : items) {
        if (strings) {
          if (item.size() < 2 || item.front() != '"' || item.back() != '"')
            fail("mixed or malformed string array");
          v.string_array.push_back(item.substr(1, item.size() - 2));
        } else {
          double num = 0;
          if (!parse_number(item, num)) fail("bad number '" + item + "' in array");
          v.number_array.push_back(num);
        }
      }
    } else {
      double num = 0;
      if (!parse_number(rhs, num)) fail("unrecognized value '" + rhs + "'");
      v.kind = Value::Kind::Number;
      v.number = num;
    }

    const std::string full = section.empty() ? key : section + "." + key;
    if (table.values_.count(full)) fail("duplicate key '" + full + "'");
    table.values_[full] = std::move(v);
  }
  return table;
}

bool TomlTable::has(const std::string& key) const { return values_.count(key) > 0; }

const TomlTable::Value& TomlTable::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw SchemaViolation(origin_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string TomlTable::get_string(const std::string& key) const {
  const Value& v = require(key);
  if (v.kind != Value::Kind::String)
    throw SchemaViolation(origin_ + ": key '" + key + "' is not a string");
  return v.str;
}

double TomlTable::get_double(const std::string& key) const {
  const Value& v = require(key);
  if (v.kind != Value::Kind::Number)
    throw SchemaViolation(origin_ + ": key '" + key + "' is not a number");
  return v.number;
}

std::int64_t TomlTable::get_int(const std::string& key) const {
  const double d = get_double(key);
  const auto i = static_cast<std::int64_t>(d);
  if (static_cast<double>(i) != d)
    throw SchemaViolation(origin_ + ": key '" + key + "' is not an integer");
  return i;
}

bool TomlTable::get_bool(const std::string& key) const {
  const Value& v = require(key);
  if (v.kind != Value::Kind::Boolean)
    throw SchemaViolation(origin_ + ": key '" + key + "' is not a boolean");
  return v.boolean;
}

std::vector<double> TomlTable::get_double_array(const std::string& key) const {
  const Value& v = require(key);
  if (v.kind != Value::Kind::NumberArray)
    throw SchemaViolation(origin_ + ": key '" + key + "' is not a number array");
  return v.number_array;
}

std::vector<std::string> TomlTable::get_string_array(const std::string& key) const {
  const Value& v = require(key);
  if (v.kind != Value::Kind::StringArray)
    throw SchemaViolation(origin_ + ": key '" + key + "' is not a string array");
  return v.string_array;
}

std::string TomlTable::get_string_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}
double TomlTable::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}
std::int64_t TomlTable::get_int_or(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}
bool TomlTable::get_bool_or(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::vector<std::string> TomlTable::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (key.rfind(prefix, 0) == 0) out.push_back(key);
  }
  return out;
}

std::string TomlTable::canonical() const {
  std::ostringstream out;
  out.precision(17);
  for (const auto& [key, v] : values_) {  // std::map iterates sorted
    out << key << " = ";
    switch (v.kind) {
      case Value::Kind::String:
        out << '"' << v.str << '"';
        break;
      case Value::Kind::Number:
        out << v.number;
        break;
      case Value::Kind::Boolean:
        out << (v.boolean ? "true" : "false");
        break;
      case Value::Kind::NumberArray: {
        out << '[';
        for (std::size_t i = 0; i < v.number_array.size(); ++i)
          out << (i ? ", " : "") << v.number_array[i];
        out << ']';
        break;
      }
      case Value::Kind::StringArray: {
        out << '[';
        for (std::size_t i = 0; i < v.string_array.size(); ++i)
          out << (i ? ", " : "") << '"' << v.string_array[i] << '"';
        out << ']';
        break;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace srmtl
