#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "ferify/sacl.hpp"
#include "ferify/syscall.hpp"

namespace ferify {

inline constexpr std::string_view kTokenPrefix = "/tokens/";
inline constexpr std::size_t kResponseHexLength = 128;
inline constexpr Seq kDefaultAuthWindow = 300;

/// Lowercase hex SHA-512 digest.
std::string sha512_hex(std::string_view data);

/// Hypervisor-side shared secrets for 2-step authentication.
struct AuthConfig {
  std::map<Uid, std::string> secrets;
  Seq window = kDefaultAuthWindow;  // logical ticks a successful token stays valid
  std::set<Uid> enabled_uids;

  /// Throws std::invalid_argument if window is 0 or an enabled uid has no secret.
  void validate() const;
  bool enabled_for(Uid uid) const { return enabled_uids.contains(uid); }
};

/// Parses `<uid> <secret>` lines ('#' comments allowed). Every listed uid is enabled.
AuthConfig parse_secrets(std::string_view text, Seq window = kDefaultAuthWindow);
AuthConfig load_secrets_file(const std::string& path, Seq window = kDefaultAuthWindow);

/// Per-uid authentication deadlines.
class AuthSessions {
 public:
  /// Uids without 2-step auth enabled are always authenticated.
  bool is_authenticated(Uid uid, Seq now, const AuthConfig& config) const;
  std::optional<Seq> authenticated_until(Uid uid) const;
  void grant(Uid uid, Seq until) { until_[uid] = until; }

 private:
  std::map<Uid, Seq> until_;
};

struct TokenParts {
  std::string challenge;
  std::string response;
};

/// Splits "/tokens/<challenge><128 lowercase hex>" into its parts. nullopt if `path` is not a
/// token path or the trailing 128 characters are not lowercase hex.
std::optional<TokenParts> split_token(std::string_view path);

/// Token bytes the user presents: challenge followed by SHA-512-hex(challenge || secret).
std::string make_token_path(std::string_view challenge, std::string_view secret);

/// Returns true when `path` is a token path (verification may still fail). On a valid response
/// for `uid` the session is extended to now + window.
bool try_token_auth(std::string_view path, Uid uid, const AuthConfig& config, AuthSessions& sessions, Seq now);

}  // namespace ferify
