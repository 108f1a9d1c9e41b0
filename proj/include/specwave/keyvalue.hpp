#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace specwave
{

/// Ordered plain-text `key=value` document. Blank lines and lines starting
/// with '#' are ignored on parse; whitespace around keys and values is trimmed.
class KeyValues
{
public:
  static KeyValues parse(const std::string &text, const std::string &source = "<text>");
  static KeyValues load(const std::filesystem::path &path);

  void set(const std::string &key, const std::string &value);
  void set(const std::string &key, const char *value) { set(key, std::string(value)); }
  template <typename T>
  void set(const std::string &key, T value)
  {
    set(key, format(value));
  }

  bool has(const std::string &key) const { return index_.count(key) != 0; }
  const std::string &get(const std::string &key) const;
  std::string get_or(const std::string &key, const std::string &fallback) const;
  double get_double(const std::string &key) const;
  long long get_int(const std::string &key) const;

  const std::vector<std::pair<std::string, std::string>> &entries() const { return entries_; }

  std::string str() const;
  void save(const std::filesystem::path &path) const;

  /// Shortest decimal text that reads back to the same double.
  static std::string format(double v);
  static std::string format(long long v) { return std::to_string(v); }
  static std::string format(unsigned long long v) { return std::to_string(v); }
  static std::string format(int v) { return std::to_string(v); }
  static std::string format(unsigned long v) { return std::to_string(v); }
  static std::string format(long v) { return std::to_string(v); }
  static std::string format(unsigned v) { return std::to_string(v); }
  static std::string format(bool v) { return v ? "true" : "false"; }

  static double to_double(const std::string &key, const std::string &text);
  static long long to_int(const std::string &key, const std::string &text);
  static bool to_bool(const std::string &key, const std::string &text);

private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace specwave
