#include "ferify/sacl.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <new>

#include <sys/mman.h>
#include <fstream>
#include <limits>
#include <sstream>

namespace ferify {

std::string_view to_string(AccessKind kind) {
  switch (kind) {
    case AccessKind::Read: return "read";
    case AccessKind::Write: return "write";
    case AccessKind::Execute: return "execute";
  }
  return "?";
}

std::string_view to_string(Decision decision) {
  return decision == Decision::Permit ? "permit" : "deny";
}

PermissionOctets::PermissionOctets(int user, int group, int other) {
  for (int v : {user, group, other}) {
    if (v < 0 || v > 7) throw std::invalid_argument("permission octet out of range: " + std::to_string(v));
  }
  user_ = static_cast<std::uint8_t>(user);
  group_ = static_cast<std::uint8_t>(group);
  other_ = static_cast<std::uint8_t>(other);
}

PermissionOctets PermissionOctets::parse(std::string_view text) {
  if (text.size() != 3) throw std::invalid_argument("permission must be 3 octal digits: '" + std::string(text) + "'");
  int d[3];
  for (int i = 0; i < 3; ++i) {
    char c = text[i];
    if (c < '0' || c > '7') throw std::invalid_argument("invalid octal digit '" + std::string(1, c) + "'");
    d[i] = c - '0';
  }
  return {d[0], d[1], d[2]};
}

std::string PermissionOctets::to_string() const {
  return {static_cast<char>('0' + user_), static_cast<char>('0' + group_), static_cast<char>('0' + other_)};
}

SaclParseError::SaclParseError(std::size_t line, const std::string& what)
    : std::runtime_error("SACL line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

constexpr std::size_t kMinSlots = 16;
constexpr std::size_t kHugePage = std::size_t{2} << 20;

// Maximum load of the slot array, as a fraction. Higher loads keep large tables inside the LLC.
constexpr std::size_t kLoadNum = 4;
constexpr std::size_t kLoadDen = 5;

bool over_load(std::size_t entries, std::size_t slots) { return entries * kLoadDen > slots * kLoadNum; }

}  // namespace

void* Sacl::allocate_bytes(std::size_t bytes, std::size_t align) {
  if (bytes < kHugePage) return ::operator new(bytes, std::align_val_t{align});
  const std::size_t rounded = (bytes + kHugePage - 1) / kHugePage * kHugePage;
  void* p = std::aligned_alloc(kHugePage, rounded);
  if (p == nullptr) throw std::bad_alloc();
  ::madvise(p, rounded, MADV_HUGEPAGE);  // advisory; failure just leaves normal pages
  return p;
}

void Sacl::release_bytes(void* p, std::size_t bytes, std::size_t align) {
  if (bytes < kHugePage) {
    ::operator delete(p, std::align_val_t{align});
  } else {
    std::free(p);
  }
}

Sacl::Sacl() : slots_(kMinSlots) {}

std::uint64_t Sacl::hash_of(std::string_view path) { return std::hash<std::string_view>{}(path); }

bool Sacl::slot_matches(const Slot& slot, std::uint64_t hash, std::string_view path) const {
  if (slot.hash != hash) return false;
  if (slot.key_len == kLongKey) return entries_[slot.index].path == path;
  return slot.key_len == path.size() && std::memcmp(slot.key, path.data(), path.size()) == 0;
}

std::size_t Sacl::distance(std::size_t i) const {
  const std::size_t mask = slots_.size() - 1;
  return (i - (slots_[i].hash & mask)) & mask;
}

// Robin Hood order: along a probe run, slots sit no farther from home than their predecessors
// would allow, so a search can stop at the first slot closer to its home than the probe is.
std::optional<std::size_t> Sacl::find_slot(std::string_view path, std::uint64_t hash) const {
  if (slots_.empty()) return std::nullopt;  // moved-from
  const std::size_t mask = slots_.size() - 1;
  for (std::size_t i = hash & mask, d = 0;; i = (i + 1) & mask, ++d) {
    const Slot& slot = slots_[i];
    if (slot.index == kEmpty || distance(i) < d) return std::nullopt;
    if (slot_matches(slot, hash, path)) return i;
  }
}

std::uint64_t Sacl::prefetch(std::string_view path) const {
  const std::uint64_t hash = hash_of(path);
  if (slots_.empty()) return hash;
  const std::size_t mask = slots_.size() - 1;
  __builtin_prefetch(&slots_[hash & mask]);
  __builtin_prefetch(&slots_[(hash + 1) & mask]);
  return hash;
}

void Sacl::place(std::uint32_t index, std::uint64_t hash) {
  const SaclEntry& e = entries_[index];
  Slot carried;
  carried.hash = hash;
  carried.index = index;
  carried.owner_uid = e.owner_uid;
  carried.owner_gid = e.owner_gid;
  carried.perms = e.perms;
  if (e.path.size() <= kInlineKey) {
    carried.key_len = static_cast<std::uint8_t>(e.path.size());
    std::memcpy(carried.key, e.path.data(), e.path.size());
  } else {
    carried.key_len = kLongKey;
  }

  const std::size_t mask = slots_.size() - 1;
  for (std::size_t i = hash & mask, d = 0;; i = (i + 1) & mask, ++d) {
    if (slots_[i].index == kEmpty) {
      slots_[i] = carried;
      return;
    }
    const std::size_t resident = distance(i);
    if (resident < d) {
      std::swap(slots_[i], carried);
      d = resident;
    }
  }
}

void Sacl::rehash(std::size_t capacity) {
  std::size_t n = kMinSlots;
  while (n < capacity || over_load(entries_.size(), n)) n *= 2;
  slots_.assign(n, Slot{});
  for (std::uint32_t i = 0; i < entries_.size(); ++i) place(i, hash_of(entries_[i].path));
}

void Sacl::reserve(std::size_t n) {
  entries_.reserve(n);
  if (over_load(n, slots_.size())) rehash((n * kLoadDen + kLoadNum - 1) / kLoadNum);
}

bool Sacl::insert(SaclEntry entry) {
  if (entry.path.empty() || entry.path.front() != '/')
    throw std::invalid_argument("SACL path must be absolute: '" + entry.path + "'");
  const std::uint64_t hash = hash_of(entry.path);
  if (find_slot(entry.path, hash)) return false;
  if (entries_.size() >= kEmpty - 1) throw std::length_error("SACL is full");
  if (over_load(entries_.size() + 1, slots_.size())) rehash(2 * slots_.size());
  entries_.push_back(std::move(entry));
  place(static_cast<std::uint32_t>(entries_.size() - 1), hash);
  return true;
}

bool Sacl::erase(std::string_view path) {
  auto found = find_slot(path, hash_of(path));
  if (!found) return false;
  const std::size_t mask = slots_.size() - 1;
  std::size_t hole = *found;
  const std::uint32_t removed = slots_[hole].index;

  // Backward shift: pull each displaced successor one step toward home.
  for (std::size_t j = (hole + 1) & mask; slots_[j].index != kEmpty && distance(j) > 0; j = (j + 1) & mask) {
    slots_[hole] = slots_[j];
    hole = j;
  }
  slots_[hole] = Slot{};

  const std::uint32_t last = static_cast<std::uint32_t>(entries_.size() - 1);
  if (removed != last) {
    auto moved = find_slot(entries_[last].path, hash_of(entries_[last].path));
    entries_[removed] = std::move(entries_[last]);
    slots_[*moved].index = removed;
  }
  entries_.pop_back();
  return true;
}

const SaclEntry* Sacl::lookup(std::string_view path) const {
  auto i = find_slot(path, hash_of(path));
  return i ? &entries_[slots_[*i].index] : nullptr;
}

std::optional<SaclRule> Sacl::rule(std::string_view path, std::uint64_t hash) const {
  auto i = find_slot(path, hash);
  if (!i) return std::nullopt;
  const Slot& slot = slots_[*i];
  return SaclRule{slot.perms, slot.owner_uid, slot.owner_gid};
}

std::vector<SaclEntry> Sacl::sorted_entries() const {
  std::vector<SaclEntry> out = entries_;
  std::sort(out.begin(), out.end(), [](const SaclEntry& a, const SaclEntry& b) { return a.path < b.path; });
  return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::uint32_t parse_id(std::string_view field, std::size_t line_no, const char* what) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() ||
      value > std::numeric_limits<std::uint32_t>::max())
    throw SaclParseError(line_no, std::string("invalid ") + what + " '" + std::string(field) + "'");
  return static_cast<std::uint32_t>(value);
}

}  // namespace

Sacl parse_sacl(std::string_view text) {
  Sacl sacl;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    if (fields.size() != 4)
      throw SaclParseError(line_no, "expected 4 columns (path perm uid gid), got " + std::to_string(fields.size()));

    SaclEntry entry;
    entry.path = std::string(fields[0]);
    if (entry.path.front() != '/') throw SaclParseError(line_no, "relative path '" + entry.path + "'");
    try {
      entry.perms = PermissionOctets::parse(fields[1]);
    } catch (const std::invalid_argument& e) {
      throw SaclParseError(line_no, e.what());
    }
    entry.owner_uid = parse_id(fields[2], line_no, "uid");
    entry.owner_gid = parse_id(fields[3], line_no, "gid");
    std::string path = entry.path;
    if (!sacl.insert(std::move(entry))) throw SaclParseError(line_no, "duplicate path '" + path + "'");
  }
  return sacl;
}

Sacl load_sacl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open SACL file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_sacl(buf.str());
}

std::string serialize(const Sacl& sacl) {
  std::string out;
  for (const auto& e : sacl.sorted_entries()) {
    out += e.path;
    out += ' ';
    out += e.perms.to_string();
    out += ' ';
    out += std::to_string(e.owner_uid);
    out += ' ';
    out += std::to_string(e.owner_gid);
    out += '\n';
  }
  return out;
}

int effective_octet(const SaclRule& rule, Uid uid, Gid gid) {
  if (uid == rule.owner_uid) return rule.perms.user();
  if (gid == rule.owner_gid) return rule.perms.group();
  return rule.perms.other();
}

int effective_octet(const SaclEntry& entry, Uid uid, Gid gid) {
  return effective_octet(SaclRule{entry.perms, entry.owner_uid, entry.owner_gid}, uid, gid);
}

Decision decide_access(const std::optional<SaclRule>& rule, Uid uid, Gid gid, AccessKind kind,
                       Decision absent_default) {
  if (!rule) return absent_default;
  return (effective_octet(*rule, uid, gid) & access_bit(kind)) != 0 ? Decision::Permit : Decision::Deny;
}

Decision check_access(const Sacl& sacl, std::string_view path, Uid uid, Gid gid, AccessKind kind,
                      Decision absent_default) {
  return decide_access(sacl.rule(path), uid, gid, kind, absent_default);
}

}  // namespace ferify
