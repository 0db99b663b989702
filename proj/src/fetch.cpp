#include "ercl/fetch.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/evp.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <memory>
#include <regex>
#include <stdexcept>

namespace ercl {

std::string md5_hex(std::span<std::uint8_t const> bytes)
{
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_md5(), nullptr) != 1) {
    throw std::runtime_error("md5 digest failed");
  }
  static char const *hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

namespace {

std::vector<std::uint8_t> read_file(std::filesystem::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot read " + path.string());
  }
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

} // namespace

std::vector<std::uint8_t> download(std::string const &url)
{
  if (url.rfind("file://", 0) == 0) {
    return read_file(url.substr(7));
  }
  std::smatch m;
  static std::regex const re(R"(^(https?://[^/]+)(/.*)?$)");
  if (!std::regex_match(url, m, re)) {
    throw std::invalid_argument("unsupported URL: " + url);
  }
  httplib::Client client(m[1].str());
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  std::string const path = m[2].matched ? m[2].str() : "/";
  auto res = client.Get(path);
  if (!res) {
    throw std::runtime_error("download failed for " + url + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw std::runtime_error("download failed for " + url + ": HTTP " + std::to_string(res->status));
  }
  return {res->body.begin(), res->body.end()};
}

std::vector<std::filesystem::path> fetch_mnist(std::filesystem::path const &dir, std::string const &mirror)
{
  std::filesystem::create_directories(dir);
  std::string base = mirror;
  if (!base.empty() && base.back() != '/') {
    base.push_back('/');
  }
  std::vector<std::filesystem::path> out;
  for (auto const &spec : kMnistDownloads) {
    std::filesystem::path const target = dir / spec.name;
    if (std::filesystem::exists(target) && md5_hex(read_file(target)) == spec.md5) {
      out.push_back(target);
      continue;
    }
    std::vector<std::uint8_t> const bytes = download(base + spec.name);
    std::string const sum = md5_hex(bytes);
    if (sum != spec.md5) {
      throw std::runtime_error(std::string("checksum mismatch for ") + spec.name + ": got " + sum + ", expected " +
                               spec.md5);
    }
    std::filesystem::path const tmp = target.string() + ".part";
    {
      std::ofstream os(tmp, std::ios::binary);
      os.write(reinterpret_cast<char const *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!os) {
        throw std::runtime_error("cannot write " + tmp.string());
      }
    }
    std::filesystem::rename(tmp, target);
    out.push_back(target);
  }
  return out;
}

std::filesystem::path data_dir(std::filesystem::path const &fallback)
{
  if (char const *env = std::getenv("ERCL_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return fallback;
}

} // namespace ercl
