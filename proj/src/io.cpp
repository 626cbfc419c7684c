// SPDX-License-Identifier: Apache-2.0

#include "rfwi/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "rfwi/errors.hpp"

namespace rfwi
{

std::string format_double(double v)
{
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text)
{
  const std::string t = trim(text);
  if (t == "nan")
    return std::nan("");
  if (t == "inf")
    return INFINITY;
  if (t == "-inf")
    return -INFINITY;
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty())
    throw ValidationError("not a number: '" + t + "'");
  return v;
}

long long parse_integer(std::string_view text)
{
  const std::string t = trim(text);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty())
    throw ValidationError("not an integer: '" + t + "'");
  return v;
}

std::string sha256_hex(std::span<const unsigned char> bytes)
{
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i)
  {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::string_view text)
{
  return sha256_hex(std::span(reinterpret_cast<const unsigned char *>(text.data()), text.size()));
}

std::string sha256_file(const std::filesystem::path &path)
{
  return sha256_hex(read_file(path));
}

std::string read_file(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path &path, std::string_view contents)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out)
    throw std::runtime_error("write failed for " + path.string());
}

std::string trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(std::string_view line, char delim)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true)
  {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

}  // namespace rfwi
