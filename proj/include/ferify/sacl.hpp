#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ferify {

using Uid = std::uint32_t;
using Gid = std::uint32_t;

enum class AccessKind { Read, Write, Execute };
enum class Decision { Permit, Deny };

std::string_view to_string(AccessKind kind);
std::string_view to_string(Decision decision);

/// Linux-style u|g|o permission triple. Each octet is a read=4/write=2/execute=1 mask.
class PermissionOctets {
 public:
  constexpr PermissionOctets() = default;
  /// Throws std::invalid_argument if any octet is outside [0,7].
  PermissionOctets(int user, int group, int other);

  /// Parses exactly three octal digits, e.g. "644".
  static PermissionOctets parse(std::string_view text);
  /// Three-digit octal text, zero padded ("044").
  std::string to_string() const;

  int user() const { return user_; }
  int group() const { return group_; }
  int other() const { return other_; }

  friend bool operator==(const PermissionOctets&, const PermissionOctets&) = default;

 private:
  std::uint8_t user_ = 0;
  std::uint8_t group_ = 0;
  std::uint8_t other_ = 0;
};

/// Bit for `kind` inside one octet.
constexpr int access_bit(AccessKind kind) {
  switch (kind) {
    case AccessKind::Read: return 4;
    case AccessKind::Write: return 2;
    case AccessKind::Execute: return 1;
  }
  return 0;
}

struct SaclEntry {
  std::string path;
  PermissionOctets perms;
  Uid owner_uid = 0;
  Gid owner_gid = 0;

  friend bool operator==(const SaclEntry&, const SaclEntry&) = default;
};

class SaclParseError : public std::runtime_error {
 public:
  SaclParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Permission data of one entry, without its path.
struct SaclRule {
  PermissionOctets perms;
  Uid owner_uid = 0;
  Gid owner_gid = 0;
};

/// Shadow access-control list. Exact full-path matching.
///
/// Entries live in a dense vector. An open-addressing index of cache-line slots maps paths to them;
/// each slot also carries the rule and, for paths up to kInlineKey bytes, the key itself, so a hit
/// usually touches one line however large the table grows.
class Sacl {
 public:
  Sacl();

  /// Inserts a row. Returns false (and leaves the table unchanged) if the path is already present.
  /// Throws std::invalid_argument for a non-absolute path.
  bool insert(SaclEntry entry);
  bool erase(std::string_view path);

  const SaclEntry* lookup(std::string_view path) const;
  /// Same match as lookup(), answered from the index alone.
  std::optional<SaclRule> rule(std::string_view path) const { return rule(path, hash_of(path)); }
  std::optional<SaclRule> rule(std::string_view path, std::uint64_t hash) const;

  /// Starts loading the slot for `path` and returns its hash for a later rule(path, hash).
  std::uint64_t prefetch(std::string_view path) const;
  static std::uint64_t hash_of(std::string_view path);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void reserve(std::size_t n);

  /// Entries sorted by path; the order serialize() writes them in.
  std::vector<SaclEntry> sorted_entries() const;

  static constexpr std::size_t kInlineKey = 40;

 private:
  static constexpr std::uint32_t kEmpty = 0xFFFFFFFFu;
  static constexpr std::uint8_t kLongKey = 0xFF;

  struct alignas(64) Slot {
    std::uint64_t hash = 0;
    std::uint32_t index = kEmpty;
    Uid owner_uid = 0;
    Gid owner_gid = 0;
    PermissionOctets perms;
    std::uint8_t key_len = 0;
    char key[kInlineKey] = {};
  };

  bool slot_matches(const Slot& slot, std::uint64_t hash, std::string_view path) const;
  /// Probe distance of the occupied slot at position i from its home position.
  std::size_t distance(std::size_t i) const;
  /// Slot position holding `path`, or nullopt.
  std::optional<std::size_t> find_slot(std::string_view path, std::uint64_t hash) const;
  void place(std::uint32_t index, std::uint64_t hash);
  void rehash(std::size_t capacity);

  static void* allocate_bytes(std::size_t bytes, std::size_t align);
  static void release_bytes(void* p, std::size_t bytes, std::size_t align);

  /// Backs large slot arrays with transparent huge pages where the kernel allows it.
  template <typename T>
  struct SlotAllocator {
    using value_type = T;
    SlotAllocator() = default;
    template <typename U>
    SlotAllocator(const SlotAllocator<U>&) {}
    T* allocate(std::size_t n) { return static_cast<T*>(allocate_bytes(n * sizeof(T), alignof(T))); }
    void deallocate(T* p, std::size_t n) { release_bytes(p, n * sizeof(T), alignof(T)); }
    friend bool operator==(const SlotAllocator&, const SlotAllocator&) { return true; }
  };

  std::vector<SaclEntry> entries_;
  std::vector<Slot, SlotAllocator<Slot>> slots_;  // power-of-two size, at most 80% full
};

/// Parses SACL text: `<absolute-path> <ooo> <uid> <gid>` per line, '#' comments, blank lines ignored.
/// Throws SaclParseError naming the 1-based line number.
Sacl parse_sacl(std::string_view text);
Sacl load_sacl_file(const std::string& path);

/// Canonical text: one entry per line, single-space separated, sorted by path.
std::string serialize(const Sacl& sacl);

/// Selects the owner, group, or other octet by the uid-then-gid cascade.
int effective_octet(const SaclRule& rule, Uid uid, Gid gid);
int effective_octet(const SaclEntry& entry, Uid uid, Gid gid);

/// Decision for an already looked-up rule; nullopt means the path is absent.
Decision decide_access(const std::optional<SaclRule>& rule, Uid uid, Gid gid, AccessKind kind,
                       Decision absent_default);

/// Absent paths get `absent_default`; present paths are permitted iff the kind's bit is set
/// in the effective octet.
Decision check_access(const Sacl& sacl, std::string_view path, Uid uid, Gid gid, AccessKind kind,
                      Decision absent_default);

}  // namespace ferify
