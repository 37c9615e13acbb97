// Copyright 2026 The peguard Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "peguard/redteam.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "peguard/error.hpp"
#include "peguard/pipeline.hpp"

namespace peguard {

namespace {

constexpr std::pair<ModificationKind, std::string_view> kKindNames[] = {
    {ModificationKind::append_overlay, "append_overlay"},
    {ModificationKind::fill_slack, "fill_slack"},
    {ModificationKind::add_section, "add_section"},
    {ModificationKind::extend_dos_header, "extend_dos_header"},
    {ModificationKind::inject_benign_strings, "inject_benign_strings"},
    {ModificationKind::set_timestamp, "set_timestamp"},
    {ModificationKind::rename_sections, "rename_sections"},
    {ModificationKind::break_checksum, "break_checksum"},
};

}  // namespace

std::string_view to_string(ModificationKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<ModificationKind> modification_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

const std::vector<ModificationKind>& all_modification_kinds() {
  static const std::vector<ModificationKind> kinds = [] {
    std::vector<ModificationKind> v;
    for (const auto& [k, _] : kKindNames) v.push_back(k);
    return v;
  }();
  return kinds;
}

Modification Modification::append_overlay(Bytes payload) {
  Modification m;
  m.kind = ModificationKind::append_overlay;
  m.payload = std::move(payload);
  return m;
}

Modification Modification::fill_slack(Bytes payload) {
  Modification m;
  m.kind = ModificationKind::fill_slack;
  m.payload = std::move(payload);
  return m;
}

Modification Modification::add_section(Bytes payload, std::string name) {
  Modification m;
  m.kind = ModificationKind::add_section;
  m.payload = std::move(payload);
  m.section_name = std::move(name);
  return m;
}

Modification Modification::extend_dos_header(Bytes payload) {
  Modification m;
  m.kind = ModificationKind::extend_dos_header;
  m.payload = std::move(payload);
  return m;
}

Modification Modification::inject_benign_strings(std::vector<std::string> strings, InjectTarget target) {
  Modification m;
  m.kind = ModificationKind::inject_benign_strings;
  m.strings = std::move(strings);
  m.target = target;
  return m;
}

Modification Modification::set_timestamp(std::uint32_t value) {
  Modification m;
  m.kind = ModificationKind::set_timestamp;
  m.value = value;
  return m;
}

Modification Modification::rename_sections(std::vector<std::string> names) {
  Modification m;
  m.kind = ModificationKind::rename_sections;
  m.names = std::move(names);
  return m;
}

Modification Modification::break_checksum(std::uint32_t value) {
  Modification m;
  m.kind = ModificationKind::break_checksum;
  m.value = value;
  return m;
}

std::string Modification::describe() const {
  std::string s(to_string(kind));
  switch (kind) {
    case ModificationKind::append_overlay:
    case ModificationKind::fill_slack:
    case ModificationKind::extend_dos_header:
      return s + "(" + std::to_string(payload.size()) + " bytes)";
    case ModificationKind::add_section:
      return s + "(" + section_name + ", " + std::to_string(payload.size()) + " bytes)";
    case ModificationKind::inject_benign_strings: {
      static constexpr const char* kTargets[] = {"overlay", "slack", "new_section", "dos_header"};
      return s + "(" + std::to_string(strings.size()) + " strings -> " + kTargets[static_cast<int>(target)] + ")";
    }
    case ModificationKind::set_timestamp:
    case ModificationKind::break_checksum:
      return s + "(" + std::to_string(value) + ")";
    case ModificationKind::rename_sections:
      return s + "(" + std::to_string(names.size()) + " names)";
  }
  return s;
}

namespace {

// Offset of the first section's raw data (end of the header region).
std::size_t first_raw_offset(const PeFile& pe) {
  std::size_t h = pe.overlay_offset;
  bool any = false;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const ByteRange r = pe.raw_range(i);
    if (r.length == 0) continue;
    h = any ? std::min(h, r.offset) : r.offset;
    any = true;
  }
  return h;
}

// Shifts the certificate-table file offset when it lies at or after \p from.
void shift_security_directory(PeFile& pe, std::size_t from, std::size_t delta) {
  const auto idx = static_cast<std::size_t>(DataDirectoryIndex::security);
  if (idx >= pe.optional.data_directories.size()) return;
  auto& d = pe.optional.data_directories[idx];
  if (d.present() && d.virtual_address >= from) d.virtual_address += static_cast<std::uint32_t>(delta);
}

// Inserts \p ins at header offset \p at, followed by zero padding so that all
// raw data moves by \p shift bytes.
void insert_into_headers(PeFile& pe, std::size_t at, ByteView ins, std::size_t shift) {
  const std::size_t h = first_raw_offset(pe);
  Bytes out;
  out.reserve(pe.raw.size() + shift);
  out.insert(out.end(), pe.raw.begin(), pe.raw.begin() + static_cast<std::ptrdiff_t>(at));
  out.insert(out.end(), ins.begin(), ins.end());
  out.insert(out.end(), pe.raw.begin() + static_cast<std::ptrdiff_t>(at),
             pe.raw.begin() + static_cast<std::ptrdiff_t>(h));
  out.insert(out.end(), shift - ins.size(), 0);
  out.insert(out.end(), pe.raw.begin() + static_cast<std::ptrdiff_t>(h), pe.raw.end());
  pe.raw = std::move(out);
  for (auto& s : pe.sections) {
    if (s.pointer_to_raw_data >= h && s.pointer_to_raw_data != 0) {
      s.pointer_to_raw_data += static_cast<std::uint32_t>(shift);
    }
  }
  pe.optional.size_of_headers += static_cast<std::uint32_t>(shift);
  shift_security_directory(pe, h, shift);
  pe.overlay_offset += shift;
}

PeFile finish(PeFile pe, std::size_t max_file_size) {
  if (pe.raw.size() > max_file_size) {
    throw SizeExceeded("modified file would be " + std::to_string(pe.raw.size()) + " bytes (limit " +
                       std::to_string(max_file_size) + ")");
  }
  return parse_pe(serialize_pe(pe));
}

void check_growth(const PeFile& pe, std::size_t extra, std::size_t max_file_size) {
  if (pe.raw.size() + extra > max_file_size) {
    throw SizeExceeded("modified file would exceed " + std::to_string(max_file_size) + " bytes");
  }
}

PeFile do_append_overlay(const PeFile& in, ByteView payload, std::size_t max) {
  check_growth(in, payload.size(), max);
  PeFile pe = in;
  pe.raw.insert(pe.raw.end(), payload.begin(), payload.end());
  return finish(std::move(pe), max);
}

PeFile do_fill_slack(const PeFile& in, ByteView payload, std::size_t max) {
  const auto regions = slack_regions(in);
  if (regions.empty()) throw NotApplicable("file has no slack space");
  PeFile pe = in;
  std::size_t done = 0;
  for (const SlackRegion& r : regions) {
    const std::size_t n = std::min(r.length, payload.size() - done);
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(done), n,
                pe.raw.begin() + static_cast<std::ptrdiff_t>(r.offset));
    done += n;
    if (done == payload.size()) return finish(std::move(pe), max);
  }
  // Grow the slack of the section whose raw data ends last in the file.
  std::size_t last = pe.sections.size();
  std::size_t last_end = 0;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const ByteRange r = pe.raw_range(i);
    if (r.length > 0 && r.end() >= last_end) {
      last_end = r.end();
      last = i;
    }
  }
  if (last == pe.sections.size()) throw NotApplicable("no section to extend");
  SectionHeader& s = pe.sections[last];
  const ByteRange r = pe.raw_range(last);
  if (s.virtual_size == 0 || r.length < s.virtual_size || r.length != s.size_of_raw_data) {
    throw NotApplicable("last section cannot take more slack");
  }
  const std::size_t rest = payload.size() - done;
  const std::size_t fa = std::max<std::uint32_t>(pe.optional.file_alignment, 1);
  const std::size_t grow = align_up(rest, fa);
  check_growth(pe, grow, max);
  Bytes fill(grow, 0);
  std::copy(payload.begin() + static_cast<std::ptrdiff_t>(done), payload.end(), fill.begin());
  pe.raw.insert(pe.raw.begin() + static_cast<std::ptrdiff_t>(r.end()), fill.begin(), fill.end());
  s.size_of_raw_data += static_cast<std::uint32_t>(grow);
  shift_security_directory(pe, r.end(), grow);
  return finish(std::move(pe), max);
}

PeFile do_add_section(const PeFile& in, ByteView payload, const std::string& name, std::size_t max) {
  if (payload.empty()) throw NotApplicable("empty section payload");
  if (in.sections.size() >= kMaxSections) throw NotApplicable("section table is full");
  PeFile pe = in;
  const std::size_t fa = std::max<std::uint32_t>(pe.optional.file_alignment, 1);
  const std::size_t sa = std::max<std::uint32_t>(pe.optional.section_alignment, 1);
  const std::size_t raw_size = align_up(payload.size(), fa);
  check_growth(pe, raw_size + 2 * fa, max);

  // Room for one more section header.
  const std::size_t table_end = pe.section_table_end();
  const std::size_t h = first_raw_offset(pe);
  bool room = table_end + kSectionHeaderSize <= h;
  for (std::size_t i = table_end; room && i < table_end + kSectionHeaderSize; ++i) room = pe.raw[i] == 0;
  if (!room) insert_into_headers(pe, table_end, Bytes(kSectionHeaderSize, 0), align_up(kSectionHeaderSize, fa));

  const std::size_t at = align_up(pe.overlay_offset, fa);
  Bytes block(at - pe.overlay_offset + raw_size, 0);
  std::copy(payload.begin(), payload.end(), block.begin() + static_cast<std::ptrdiff_t>(at - pe.overlay_offset));
  pe.raw.insert(pe.raw.begin() + static_cast<std::ptrdiff_t>(pe.overlay_offset), block.begin(), block.end());
  shift_security_directory(pe, pe.overlay_offset, block.size());

  std::uint64_t va_end = align_up(pe.optional.size_of_headers, sa);
  for (const auto& s : pe.sections) {
    va_end = std::max<std::uint64_t>(va_end, s.virtual_address + std::max(s.virtual_size, s.size_of_raw_data));
  }
  SectionHeader ns;
  ns.set_name(name);
  ns.virtual_address = static_cast<std::uint32_t>(align_up(va_end, sa));
  ns.virtual_size = static_cast<std::uint32_t>(payload.size());
  ns.pointer_to_raw_data = static_cast<std::uint32_t>(at);
  ns.size_of_raw_data = static_cast<std::uint32_t>(raw_size);
  ns.characteristics = kScnCntInitializedData | kScnMemRead;
  pe.sections.push_back(ns);
  pe.coff.number_of_sections = static_cast<std::uint16_t>(pe.sections.size());
  pe.optional.size_of_image = static_cast<std::uint32_t>(align_up(ns.virtual_address + ns.virtual_size, sa));
  return finish(std::move(pe), max);
}

PeFile do_extend_dos_header(const PeFile& in, ByteView payload, std::size_t max) {
  if (payload.empty()) throw NotApplicable("empty DOS header extension");
  const std::size_t fa = std::max<std::uint32_t>(in.optional.file_alignment, 1);
  const std::size_t shift = align_up(payload.size(), fa);
  check_growth(in, shift, max);
  PeFile pe = in;
  const std::size_t at = pe.dos.e_lfanew;
  insert_into_headers(pe, at, payload, shift);
  pe.dos.e_lfanew += static_cast<std::uint32_t>(payload.size());
  return finish(std::move(pe), max);
}

Bytes join_strings(const std::vector<std::string>& strings) {
  Bytes out;
  for (const auto& s : strings) {
    out.insert(out.end(), s.begin(), s.end());
    out.push_back(0);
  }
  return out;
}

}  // namespace

PeFile apply(const Modification& mod, const PeFile& pe, std::size_t max_file_size) {
  switch (mod.kind) {
    case ModificationKind::append_overlay:
      return do_append_overlay(pe, mod.payload, max_file_size);
    case ModificationKind::fill_slack:
      if (mod.payload.empty()) throw NotApplicable("empty slack payload");
      return do_fill_slack(pe, mod.payload, max_file_size);
    case ModificationKind::add_section:
      return do_add_section(pe, mod.payload, mod.section_name, max_file_size);
    case ModificationKind::extend_dos_header:
      return do_extend_dos_header(pe, mod.payload, max_file_size);
    case ModificationKind::inject_benign_strings: {
      const Bytes payload = join_strings(mod.strings);
      if (payload.empty()) throw NotApplicable("no strings to inject");
      switch (mod.target) {
        case InjectTarget::overlay: return do_append_overlay(pe, payload, max_file_size);
        case InjectTarget::slack: return do_fill_slack(pe, payload, max_file_size);
        case InjectTarget::new_section: return do_add_section(pe, payload, ".rdata2", max_file_size);
        case InjectTarget::dos_header: return do_extend_dos_header(pe, payload, max_file_size);
      }
      throw NotApplicable("unknown injection target");
    }
    case ModificationKind::set_timestamp: {
      PeFile out = pe;
      out.coff.time_date_stamp = mod.value;
      return finish(std::move(out), max_file_size);
    }
    case ModificationKind::rename_sections: {
      if (pe.sections.empty()) throw NotApplicable("no sections to rename");
      PeFile out = pe;
      for (std::size_t i = 0; i < out.sections.size() && i < mod.names.size(); ++i) {
        out.sections[i].set_name(mod.names[i]);
      }
      return finish(std::move(out), max_file_size);
    }
    case ModificationKind::break_checksum: {
      PeFile out = pe;
      out.optional.checksum = mod.value;
      return finish(std::move(out), max_file_size);
    }
  }
  throw NotApplicable("unknown modification");
}

Bytes mimicry_payload(ByteView donor, std::size_t budget) {
  if (budget == 0) throw Error("mimicry budget must be positive");
  const auto strings = extract_printable_strings(donor, 4);
  if (strings.empty()) throw NoStrings("donor file has no printable strings");
  Bytes out;
  for (const auto& s : strings) {
    out.insert(out.end(), s.text.begin(), s.text.end());
    out.push_back(0);
    if (out.size() >= budget) break;
  }
  if (out.size() > budget) out.resize(budget);
  return out;
}

double AttackOutcome::transfer_rate() const {
  return surrogate_benign == 0 ? 0.0
                               : static_cast<double>(surrogate_transferred) / static_cast<double>(surrogate_benign);
}

namespace {

class CandidateGenerator {
 public:
  CandidateGenerator(const AttackBudget& budget, const AttackOptions& options)
      : budget_(budget), options_(options), rng_(budget.seed) {
    if (!options.donor.empty()) {
      for (const auto& s : extract_printable_strings(options.donor, 4)) donor_strings_.push_back(s.text);
    }
  }

  Modification next() {
    std::uniform_int_distribution<std::size_t> pick(0, budget_.pool.size() - 1);
    const ModificationKind kind = budget_.pool[pick(rng_)];
    switch (kind) {
      case ModificationKind::append_overlay: return Modification::append_overlay(content(payload_size()));
      case ModificationKind::fill_slack: return Modification::fill_slack(content(payload_size()));
      case ModificationKind::add_section: return Modification::add_section(content(payload_size()), ".rsrc2");
      case ModificationKind::extend_dos_header: return Modification::extend_dos_header(content(payload_size()));
      case ModificationKind::inject_benign_strings: {
        std::vector<std::string> picked;
        std::size_t total = 0;
        const std::size_t want = payload_size();
        while (total < want) {
          picked.push_back(random_string());
          total += picked.back().size() + 1;
        }
        std::uniform_int_distribution<int> target(0, 2);
        static constexpr InjectTarget kTargets[] = {InjectTarget::overlay, InjectTarget::slack,
                                                    InjectTarget::new_section};
        return Modification::inject_benign_strings(std::move(picked), kTargets[target(rng_)]);
      }
      case ModificationKind::set_timestamp:
        return Modification::set_timestamp(static_cast<std::uint32_t>(rng_()));
      case ModificationKind::rename_sections: {
        static constexpr const char* kNames[] = {".text", ".data", ".rdata", ".rsrc", ".reloc", ".pdata", "CODE"};
        std::vector<std::string> names;
        std::uniform_int_distribution<std::size_t> n(0, std::size(kNames) - 1);
        for (int i = 0; i < 8; ++i) names.emplace_back(kNames[n(rng_)]);
        return Modification::rename_sections(std::move(names));
      }
      case ModificationKind::break_checksum:
        return Modification::break_checksum(static_cast<std::uint32_t>(rng_()));
    }
    return Modification::append_overlay(content(payload_size()));
  }

  bool retain() { return std::bernoulli_distribution(options_.retain_probability)(rng_); }
  std::mt19937_64& rng() { return rng_; }

 private:
  // Log-uniform in [min_payload, max_payload].
  std::size_t payload_size() {
    const double lo = std::log(static_cast<double>(std::max<std::size_t>(options_.min_payload, 1)));
    const double hi = std::log(static_cast<double>(std::max(options_.max_payload, options_.min_payload)));
    std::uniform_real_distribution<double> u(lo, hi);
    return static_cast<std::size_t>(std::llround(std::exp(u(rng_))));
  }

  std::string random_string() {
    if (!donor_strings_.empty()) {
      std::uniform_int_distribution<std::size_t> i(0, donor_strings_.size() - 1);
      return donor_strings_[i(rng_)];
    }
    std::uniform_int_distribution<int> len(5, 24), ch('a', 'z');
    std::string s(static_cast<std::size_t>(len(rng_)), 'a');
    for (char& c : s) c = static_cast<char>(ch(rng_));
    return s;
  }

  Bytes content(std::size_t n) {
    Bytes out;
    out.reserve(n + 32);
    // Start at a random string so successive payloads differ.
    while (out.size() < n) {
      const std::string s = random_string();
      out.insert(out.end(), s.begin(), s.end());
      out.push_back(0);
    }
    out.resize(n);
    return out;
  }

  const AttackBudget& budget_;
  const AttackOptions& options_;
  std::mt19937_64 rng_;
  std::vector<std::string> donor_strings_;
};

}  // namespace

AttackOutcome blackbox_attack(const Oracle& oracle, ByteView malware, const AttackBudget& budget,
                              const AttackOptions& options) {
  AttackOutcome out;
  out.final_sample.assign(malware.begin(), malware.end());
  if (budget.max_queries == 0) return out;

  auto query = [&](ByteView sample, const std::string& what) {
    const int verdict = oracle(sample) != 0 ? 1 : 0;
    ++out.queries_used;
    out.log.push_back({out.queries_used, what, verdict, sample.size(), false});
    return verdict;
  };

  if (query(malware, "original") == 0) {
    out.evaded = true;
    return out;
  }
  if (budget.pool.empty()) {
    while (out.queries_used < budget.max_queries) query(malware, "original");
    return out;
  }

  std::optional<PeFile> original;
  try {
    original = parse_pe(malware);
  } catch (const MalformedPe&) {
    // Nothing structural can be modified; spend the budget re-querying.
    while (out.queries_used < budget.max_queries) query(malware, "original");
    return out;
  }

  CandidateGenerator gen(budget, options);
  PeFile current = *original;
  std::size_t failures = 0;
  const std::size_t max_failures = 50 * budget.max_queries + 100;

  auto make_candidate = [&](PeFile& cand, std::string& what) {
    while (failures < max_failures) {
      const Modification mod = gen.next();
      try {
        cand = apply(mod, current, budget.max_file_size);
        what = mod.describe();
        return true;
      } catch (const SizeExceeded&) {
        current = *original;  // restart from the unmodified sample
        ++failures;
      } catch (const NotApplicable&) {
        ++failures;
      }
    }
    return false;
  };

  while (out.queries_used < budget.max_queries) {
    PeFile cand;
    std::string what;
    bool screened_benign = false;
    if (options.surrogate) {
      double best_score = 2.0;
      bool found = false;
      for (std::size_t i = 0; i < std::max<std::size_t>(options.surrogate_candidates, 1); ++i) {
        PeFile c;
        std::string w;
        if (!make_candidate(c, w)) break;
        const double score = options.surrogate->model.predict(model_input(c.bytes(), options.surrogate->kind));
        if (score < best_score) {
          best_score = score;
          cand = std::move(c);
          what = std::move(w);
          found = true;
        }
        if (score < options.surrogate->threshold) break;
      }
      if (!found) break;
      screened_benign = best_score < options.surrogate->threshold;
    } else if (!make_candidate(cand, what)) {
      break;
    }

    const int verdict = query(cand.bytes(), what);
    if (screened_benign) {
      ++out.surrogate_benign;
      out.surrogate_transferred += verdict == 0 ? 1 : 0;
    }
    if (verdict == 0) {
      out.evaded = true;
      out.final_sample = cand.raw;
      return out;
    }
    if (gen.retain()) {
      out.log.back().retained = true;
      current = std::move(cand);
    }
  }
  // Budget exhausted or no applicable modification left: report the last
  // retained sample.
  out.final_sample = current.raw;
  return out;
}

Surrogate build_surrogate(const std::vector<std::pair<Bytes, int>>& local_data, const TrainConfig& config,
                          std::string kind) {
  Surrogate s;
  s.kind = std::move(kind);
  Dataset data(model_input_dimension(s.kind));
  for (const auto& [bytes, label] : local_data) data.add_row(model_input(bytes, s.kind), label);
  s.model = train(data, config);
  s.model.variant = s.kind;
  return s;
}

}  // namespace peguard
