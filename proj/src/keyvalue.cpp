#include "specwave/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "specwave/error.hpp"

namespace specwave
{

namespace
{

std::string trim(const std::string &s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
  {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(const std::string &text, const std::string &source)
{
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line))
  {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#')
    {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos || trim(t.substr(0, eq)).empty())
    {
      throw InvalidArgument(source + ":" + std::to_string(number) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (kv.has(key))
    {
      throw InvalidArgument(source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    }
    kv.set(key, trim(t.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw InvalidArgument("cannot open '" + path.string() + "'");
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

void KeyValues::set(const std::string &key, const std::string &value)
{
  const auto it = index_.find(key);
  if (it != index_.end())
  {
    entries_[it->second].second = value;
    return;
  }
  index_[key] = entries_.size();
  entries_.emplace_back(key, value);
}

const std::string &KeyValues::get(const std::string &key) const
{
  const auto it = index_.find(key);
  if (it == index_.end())
  {
    throw InvalidArgument("missing key '" + key + "'");
  }
  return entries_[it->second].second;
}

std::string KeyValues::get_or(const std::string &key, const std::string &fallback) const
{
  return has(key) ? get(key) : fallback;
}

double KeyValues::get_double(const std::string &key) const
{
  return to_double(key, get(key));
}

long long KeyValues::get_int(const std::string &key) const
{
  return to_int(key, get(key));
}

std::string KeyValues::str() const
{
  std::string out;
  for (const auto &[k, v] : entries_)
  {
    out += k + "=" + v + "\n";
  }
  return out;
}

void KeyValues::save(const std::filesystem::path &path) const
{
  if (path.has_parent_path())
  {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out)
  {
    throw InvalidArgument("cannot open '" + path.string() + "' for writing");
  }
  out << str();
}

std::string KeyValues::format(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double KeyValues::to_double(const std::string &key, const std::string &text)
{
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
  {
    throw InvalidArgument("key '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

long long KeyValues::to_int(const std::string &key, const std::string &text)
{
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
  {
    throw InvalidArgument("key '" + key + "': '" + text + "' is not an integer");
  }
  return v;
}

bool KeyValues::to_bool(const std::string &key, const std::string &text)
{
  if (text == "true" || text == "1" || text == "yes")
  {
    return true;
  }
  if (text == "false" || text == "0" || text == "no")
  {
    return false;
  }
  throw InvalidArgument("key '" + key + "': '" + text + "' is not a boolean");
}

}  // namespace specwave
