#include "ferify/auth.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace ferify {

std::string sha512_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha512(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("SHA-512 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

void AuthConfig::validate() const {
  if (window == 0) throw std::invalid_argument("auth window must be positive");
  for (Uid uid : enabled_uids)
    if (!secrets.contains(uid)) throw std::invalid_argument("no secret for auth-enabled uid " + std::to_string(uid));
}

AuthConfig parse_secrets(std::string_view text, Seq window) {
  AuthConfig config;
  config.window = window;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string uid_text;
    std::string secret;
    if (!(fields >> uid_text) || uid_text.front() == '#') continue;
    Uid uid = 0;
    auto [ptr, ec] = std::from_chars(uid_text.data(), uid_text.data() + uid_text.size(), uid);
    if (ec != std::errc{} || ptr != uid_text.data() + uid_text.size())
      throw std::invalid_argument("secrets line " + std::to_string(line_no) + ": invalid uid '" + uid_text + "'");
    std::string extra;
    if (!(fields >> secret) || (fields >> extra))
      throw std::invalid_argument("secrets line " + std::to_string(line_no) + ": expected '<uid> <secret>'");
    if (!config.secrets.emplace(uid, secret).second)
      throw std::invalid_argument("secrets line " + std::to_string(line_no) + ": duplicate uid " + uid_text);
    config.enabled_uids.insert(uid);
  }
  config.validate();
  return config;
}

AuthConfig load_secrets_file(const std::string& path, Seq window) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open secrets file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_secrets(buf.str(), window);
}

bool AuthSessions::is_authenticated(Uid uid, Seq now, const AuthConfig& config) const {
  if (!config.enabled_for(uid)) return true;
  auto it = until_.find(uid);
  return it != until_.end() && now <= it->second;
}

std::optional<Seq> AuthSessions::authenticated_until(Uid uid) const {
  auto it = until_.find(uid);
  if (it == until_.end()) return std::nullopt;
  return it->second;
}

std::optional<TokenParts> split_token(std::string_view path) {
  if (!path.starts_with(kTokenPrefix)) return std::nullopt;
  std::string_view rest = path.substr(kTokenPrefix.size());
  if (rest.size() < kResponseHexLength) return std::nullopt;
  std::string_view response = rest.substr(rest.size() - kResponseHexLength);
  bool hex = std::all_of(response.begin(), response.end(),
                         [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
  if (!hex) return std::nullopt;
  return TokenParts{std::string(rest.substr(0, rest.size() - kResponseHexLength)), std::string(response)};
}

std::string make_token_path(std::string_view challenge, std::string_view secret) {
  std::string material(challenge);
  material += secret;
  return std::string(kTokenPrefix) + std::string(challenge) + sha512_hex(material);
}

bool try_token_auth(std::string_view path, Uid uid, const AuthConfig& config, AuthSessions& sessions, Seq now) {
  if (!path.starts_with(kTokenPrefix)) return false;
  auto parts = split_token(path);
  auto secret = config.secrets.find(uid);
  if (!parts || secret == config.secrets.end()) return true;
  if (sha512_hex(parts->challenge + secret->second) == parts->response) sessions.grant(uid, now + config.window);
  return true;
}

}  // namespace ferify
