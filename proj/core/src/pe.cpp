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

#include "peguard/pe.hpp"

#include <algorithm>
#include <numeric>

#include "peguard/error.hpp"

namespace peguard {
namespace {

// Optional header field offsets that differ between PE32 and PE32+.
struct OptionalLayout {
  std::size_t image_base;
  std::size_t image_base_width;
  std::size_t number_of_rva_and_sizes;
  std::size_t data_directories;
};

constexpr OptionalLayout kPe32Layout{28, 4, 92, 96};
constexpr OptionalLayout kPe32PlusLayout{24, 8, 108, 112};

constexpr std::size_t kOptEntryPoint = 16;
constexpr std::size_t kOptSectionAlignment = 32;
constexpr std::size_t kOptFileAlignment = 36;
constexpr std::size_t kOptSizeOfImage = 56;
constexpr std::size_t kOptSizeOfHeaders = 60;
constexpr std::size_t kOptCheckSum = 64;

constexpr std::size_t kMaxImportLibraries = 256;
constexpr std::size_t kMaxImportsPerLibrary = 4096;
constexpr std::size_t kMaxExports = 4096;
constexpr std::size_t kMaxNameLength = 256;

const OptionalLayout& layout_for(std::uint16_t magic) {
  return magic == kPe32PlusMagic ? kPe32PlusLayout : kPe32Layout;
}

bool fits(std::size_t offset, std::size_t length, std::size_t size) {
  return offset <= size && length <= size - offset;
}

void require(bool condition, const char* what) {
  if (!condition) throw MalformedPe(what);
}

std::optional<std::string> read_cstring(const PeFile& pe, std::uint32_t rva) {
  auto offset = rva_to_offset(pe, rva);
  if (!offset) return std::nullopt;
  std::string out;
  for (std::size_t i = *offset; i < pe.raw.size() && out.size() < kMaxNameLength; ++i) {
    if (pe.raw[i] == 0) return out;
    out.push_back(static_cast<char>(pe.raw[i]));
  }
  return out.empty() ? std::nullopt : std::optional<std::string>(out);
}

void warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings) warnings->push_back(std::move(message));
}

}  // namespace

DataDirectory OptionalHeader::directory(DataDirectoryIndex index) const {
  auto i = static_cast<std::size_t>(index);
  return i < data_directories.size() ? data_directories[i] : DataDirectory{};
}

std::string SectionHeader::name_string() const {
  auto end = std::find(name.begin(), name.end(), '\0');
  return std::string(name.begin(), end);
}

void SectionHeader::set_name(std::string_view n) {
  name.fill('\0');
  std::copy_n(n.begin(), std::min(n.size(), name.size()), name.begin());
}

ByteRange PeFile::raw_range(std::size_t index) const {
  const auto& s = sections.at(index);
  std::size_t begin = std::min<std::size_t>(s.pointer_to_raw_data, raw.size());
  std::size_t end = std::min<std::size_t>(
      static_cast<std::size_t>(s.pointer_to_raw_data) + s.size_of_raw_data, raw.size());
  if (s.size_of_raw_data == 0) end = begin;
  return {begin, end - begin};
}

ByteView PeFile::section_bytes(std::size_t index) const {
  auto r = raw_range(index);
  return ByteView(raw).subspan(r.offset, r.length);
}

std::uint64_t PeFile::virtual_size() const {
  return std::accumulate(sections.begin(), sections.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const SectionHeader& s) {
                           return acc + s.virtual_size;
                         });
}

PeFile parse_pe(ByteView bytes) { return parse_pe(Bytes(bytes.begin(), bytes.end())); }

PeFile parse_pe(Bytes&& bytes) {
  PeFile pe;
  pe.raw = std::move(bytes);
  ByteView data(pe.raw);
  const std::size_t size = data.size();

  require(size >= kDosHeaderSize, "file shorter than DOS header");
  pe.dos.magic = load_le<std::uint16_t>(data, 0);
  require(pe.dos.magic == kDosMagic, "missing MZ signature");
  pe.dos.e_lfanew = load_le<std::uint32_t>(data, 0x3C);
  require(fits(pe.dos.e_lfanew, 4 + kCoffHeaderSize, size), "e_lfanew out of bounds");
  require(load_le<std::uint32_t>(data, pe.dos.e_lfanew) == kPeSignature,
          "missing PE signature");

  const std::size_t coff = pe.dos.e_lfanew + 4;
  pe.coff.machine = load_le<std::uint16_t>(data, coff);
  pe.coff.number_of_sections = load_le<std::uint16_t>(data, coff + 2);
  pe.coff.time_date_stamp = load_le<std::uint32_t>(data, coff + 4);
  pe.coff.pointer_to_symbol_table = load_le<std::uint32_t>(data, coff + 8);
  pe.coff.number_of_symbols = load_le<std::uint32_t>(data, coff + 12);
  pe.coff.size_of_optional_header = load_le<std::uint16_t>(data, coff + 16);
  pe.coff.characteristics = load_le<std::uint16_t>(data, coff + 18);

  const std::size_t opt = pe.optional_header_offset();
  require(pe.coff.size_of_optional_header >= 2 &&
              fits(opt, pe.coff.size_of_optional_header, size),
          "optional header out of bounds");
  pe.optional.magic = load_le<std::uint16_t>(data, opt);
  require(pe.optional.magic == kPe32Magic || pe.optional.magic == kPe32PlusMagic,
          "unsupported optional header magic");
  const auto& layout = layout_for(pe.optional.magic);
  require(pe.coff.size_of_optional_header >= layout.data_directories,
          "optional header too small");

  auto& oh = pe.optional;
  oh.address_of_entry_point = load_le<std::uint32_t>(data, opt + kOptEntryPoint);
  oh.image_base = layout.image_base_width == 8
                      ? load_le<std::uint64_t>(data, opt + layout.image_base)
                      : load_le<std::uint32_t>(data, opt + layout.image_base);
  oh.section_alignment = load_le<std::uint32_t>(data, opt + kOptSectionAlignment);
  oh.file_alignment = load_le<std::uint32_t>(data, opt + kOptFileAlignment);
  oh.size_of_image = load_le<std::uint32_t>(data, opt + kOptSizeOfImage);
  oh.size_of_headers = load_le<std::uint32_t>(data, opt + kOptSizeOfHeaders);
  oh.checksum = load_le<std::uint32_t>(data, opt + kOptCheckSum);
  oh.number_of_rva_and_sizes = load_le<std::uint32_t>(data, opt + layout.number_of_rva_and_sizes);

  const std::size_t dir_room =
      (pe.coff.size_of_optional_header - layout.data_directories) / 8;
  std::size_t dir_count = std::min<std::size_t>(oh.number_of_rva_and_sizes, kNumDataDirectories);
  if (dir_count > dir_room) {
    pe.warnings.push_back("data directory count exceeds optional header");
    dir_count = dir_room;
  }
  for (std::size_t i = 0; i < dir_count; ++i) {
    const std::size_t at = opt + layout.data_directories + i * 8;
    oh.data_directories.push_back(
        {load_le<std::uint32_t>(data, at), load_le<std::uint32_t>(data, at + 4)});
  }

  require(pe.coff.number_of_sections <= kMaxSections, "section count exceeds limit");
  const std::size_t table = pe.section_table_offset();
  require(fits(table, pe.coff.number_of_sections * kSectionHeaderSize, size),
          "section table exceeds file");
  for (std::size_t i = 0; i < pe.coff.number_of_sections; ++i) {
    const std::size_t at = table + i * kSectionHeaderSize;
    SectionHeader s;
    std::copy_n(data.begin() + at, 8, reinterpret_cast<std::uint8_t*>(s.name.data()));
    s.virtual_size = load_le<std::uint32_t>(data, at + 8);
    s.virtual_address = load_le<std::uint32_t>(data, at + 12);
    s.size_of_raw_data = load_le<std::uint32_t>(data, at + 16);
    s.pointer_to_raw_data = load_le<std::uint32_t>(data, at + 20);
    s.characteristics = load_le<std::uint32_t>(data, at + 36);
    pe.sections.push_back(s);
  }

  const std::size_t table_end = pe.section_table_end();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const auto& s = pe.sections[i];
    if (s.size_of_raw_data == 0) continue;
    const std::uint64_t end = std::uint64_t{s.pointer_to_raw_data} + s.size_of_raw_data;
    if (end > size) {
      pe.warnings.push_back("section " + std::to_string(i) + " (" + s.name_string() +
                            ") raw data clamped to end of file");
    }
    if (pe.raw_range(i).length == 0) continue;
    require(s.pointer_to_raw_data >= table_end, "section raw data overlaps headers");
    order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pe.sections[a].pointer_to_raw_data < pe.sections[b].pointer_to_raw_data;
  });
  std::size_t overlay_offset = std::min<std::size_t>(oh.size_of_headers, size);
  overlay_offset = std::max(overlay_offset, std::min(table_end, size));
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto r = pe.raw_range(order[k]);
    if (k > 0) {
      require(r.offset >= pe.raw_range(order[k - 1]).end(), "overlapping section raw data");
    }
    overlay_offset = k == 0 ? r.end() : std::max(overlay_offset, r.end());
  }
  pe.overlay_offset = std::min(overlay_offset, size);
  return pe;
}

std::vector<SlackRegion> slack_regions(const PeFile& pe) {
  std::vector<SlackRegion> out;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const auto& s = pe.sections[i];
    if (s.size_of_raw_data <= s.mapped_size()) continue;
    auto r = pe.raw_range(i);
    const std::size_t used = std::min<std::size_t>(s.mapped_size(), r.length);
    if (r.length > used) out.push_back({i, r.offset + used, r.length - used});
  }
  std::sort(out.begin(), out.end(),
            [](const SlackRegion& a, const SlackRegion& b) { return a.offset < b.offset; });
  return out;
}

ByteRange overlay(const PeFile& pe) {
  return {pe.overlay_offset, pe.file_size() - pe.overlay_offset};
}

Bytes truncate_to_virtual_size(const PeFile& pe) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    if (pe.raw_range(i).length > 0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pe.sections[a].pointer_to_raw_data < pe.sections[b].pointer_to_raw_data;
  });

  std::size_t header_len = std::clamp<std::size_t>(pe.optional.size_of_headers,
                                                   pe.section_table_end(), pe.file_size());
  if (!order.empty()) {
    header_len = std::min<std::size_t>(header_len, pe.sections[order.front()].pointer_to_raw_data);
  }

  PeFile out = pe;
  out.raw.assign(pe.raw.begin(), pe.raw.begin() + static_cast<std::ptrdiff_t>(header_len));
  for (std::size_t i : order) {
    auto& s = out.sections[i];
    const auto r = pe.raw_range(i);
    const std::size_t keep = std::min<std::size_t>(r.length, s.mapped_size());
    s.pointer_to_raw_data = static_cast<std::uint32_t>(out.raw.size());
    s.size_of_raw_data = static_cast<std::uint32_t>(keep);
    out.raw.insert(out.raw.end(), pe.raw.begin() + static_cast<std::ptrdiff_t>(r.offset),
                   pe.raw.begin() + static_cast<std::ptrdiff_t>(r.offset + keep));
  }
  // Sections whose raw data was clamped away keep their size only if it still
  // fits; otherwise they would read past the new end of file.
  for (std::size_t i = 0; i < out.sections.size(); ++i) {
    if (pe.raw_range(i).length == 0) out.sections[i].size_of_raw_data = 0;
  }
  return serialize_pe(out);
}

std::vector<PrintableString> extract_printable_strings(ByteView bytes, std::size_t min_len) {
  if (min_len == 0) min_len = 1;
  std::vector<PrintableString> out;
  std::size_t i = 0;
  const std::size_t n = bytes.size();
  while (i < n) {
    if (!is_printable(bytes[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_printable(bytes[j])) ++j;
    if (j - i >= min_len) {
      out.push_back({i, std::string(reinterpret_cast<const char*>(bytes.data() + i), j - i)});
    }
    i = j;
  }
  return out;
}

Bytes serialize_pe(const PeFile& pe) {
  const std::size_t size = pe.raw.size();
  if (pe.coff.number_of_sections != pe.sections.size()) {
    throw LayoutConflict("section count does not match section table");
  }
  const auto& layout = layout_for(pe.optional.magic);
  const std::size_t opt = pe.optional_header_offset();
  if (pe.coff.size_of_optional_header <
      layout.data_directories + pe.optional.data_directories.size() * 8) {
    throw LayoutConflict("data directories do not fit the optional header");
  }
  const std::size_t table_end = pe.section_table_end();
  if (table_end > size) {
    throw LayoutConflict("headers do not fit the file");
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const auto& s = pe.sections[i];
    if (s.size_of_raw_data == 0 || s.pointer_to_raw_data >= size) continue;
    if (s.pointer_to_raw_data < table_end) {
      throw LayoutConflict("section " + std::to_string(i) + " overlaps headers");
    }
    order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pe.sections[a].pointer_to_raw_data < pe.sections[b].pointer_to_raw_data;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (pe.raw_range(order[k]).offset < pe.raw_range(order[k - 1]).end()) {
      throw LayoutConflict("sections " + std::to_string(order[k - 1]) + " and " +
                           std::to_string(order[k]) + " overlap");
    }
  }

  Bytes out = pe.raw;
  std::span<std::uint8_t> w(out);
  store_le<std::uint16_t>(w, 0, pe.dos.magic);
  store_le<std::uint32_t>(w, 0x3C, pe.dos.e_lfanew);
  store_le<std::uint32_t>(w, pe.dos.e_lfanew, kPeSignature);
  const std::size_t coff = pe.dos.e_lfanew + 4;
  store_le<std::uint16_t>(w, coff, pe.coff.machine);
  store_le<std::uint16_t>(w, coff + 2, pe.coff.number_of_sections);
  store_le<std::uint32_t>(w, coff + 4, pe.coff.time_date_stamp);
  store_le<std::uint32_t>(w, coff + 8, pe.coff.pointer_to_symbol_table);
  store_le<std::uint32_t>(w, coff + 12, pe.coff.number_of_symbols);
  store_le<std::uint16_t>(w, coff + 16, pe.coff.size_of_optional_header);
  store_le<std::uint16_t>(w, coff + 18, pe.coff.characteristics);

  const auto& oh = pe.optional;
  store_le<std::uint16_t>(w, opt, oh.magic);
  store_le<std::uint32_t>(w, opt + kOptEntryPoint, oh.address_of_entry_point);
  if (layout.image_base_width == 8) {
    store_le<std::uint64_t>(w, opt + layout.image_base, oh.image_base);
  } else {
    store_le<std::uint32_t>(w, opt + layout.image_base, static_cast<std::uint32_t>(oh.image_base));
  }
  store_le<std::uint32_t>(w, opt + kOptSectionAlignment, oh.section_alignment);
  store_le<std::uint32_t>(w, opt + kOptFileAlignment, oh.file_alignment);
  store_le<std::uint32_t>(w, opt + kOptSizeOfImage, oh.size_of_image);
  store_le<std::uint32_t>(w, opt + kOptSizeOfHeaders, oh.size_of_headers);
  store_le<std::uint32_t>(w, opt + kOptCheckSum, oh.checksum);
  store_le<std::uint32_t>(w, opt + layout.number_of_rva_and_sizes, oh.number_of_rva_and_sizes);
  for (std::size_t i = 0; i < oh.data_directories.size(); ++i) {
    const std::size_t at = opt + layout.data_directories + i * 8;
    store_le<std::uint32_t>(w, at, oh.data_directories[i].virtual_address);
    store_le<std::uint32_t>(w, at + 4, oh.data_directories[i].size);
  }

  const std::size_t table = pe.section_table_offset();
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const auto& s = pe.sections[i];
    const std::size_t at = table + i * kSectionHeaderSize;
    std::copy(s.name.begin(), s.name.end(), out.begin() + static_cast<std::ptrdiff_t>(at));
    store_le<std::uint32_t>(w, at + 8, s.virtual_size);
    store_le<std::uint32_t>(w, at + 12, s.virtual_address);
    store_le<std::uint32_t>(w, at + 16, s.size_of_raw_data);
    store_le<std::uint32_t>(w, at + 20, s.pointer_to_raw_data);
    store_le<std::uint32_t>(w, at + 36, s.characteristics);
  }
  return out;
}

std::optional<std::size_t> rva_to_offset(const PeFile& pe, std::uint32_t rva) {
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const auto& s = pe.sections[i];
    const std::uint64_t span = std::max(s.mapped_size(), s.size_of_raw_data);
    if (rva < s.virtual_address || rva >= std::uint64_t{s.virtual_address} + span) continue;
    const std::size_t delta = rva - s.virtual_address;
    const auto r = pe.raw_range(i);
    if (delta < r.length) return r.offset + delta;
    return std::nullopt;
  }
  if (rva < pe.optional.size_of_headers && rva < pe.file_size()) return rva;
  return std::nullopt;
}

std::vector<ImportedLibrary> parse_imports(const PeFile& pe, std::vector<std::string>* warnings) {
  std::vector<ImportedLibrary> out;
  const auto dir = pe.optional.directory(DataDirectoryIndex::imports);
  if (dir.virtual_address == 0) return out;
  auto base = rva_to_offset(pe, dir.virtual_address);
  if (!base) {
    warn(warnings, "import directory not backed by file data");
    return out;
  }
  ByteView data(pe.raw);
  const std::size_t thunk_width = pe.optional.is_pe32_plus() ? 8 : 4;
  const std::uint64_t ordinal_flag =
      pe.optional.is_pe32_plus() ? 0x8000000000000000ULL : 0x80000000ULL;

  for (std::size_t k = 0; k < kMaxImportLibraries; ++k) {
    const std::size_t at = *base + k * 20;
    if (!fits(at, 20, data.size())) {
      warn(warnings, "import descriptor table truncated");
      return out;
    }
    const auto original_first_thunk = load_le<std::uint32_t>(data, at);
    const auto name_rva = load_le<std::uint32_t>(data, at + 12);
    const auto first_thunk = load_le<std::uint32_t>(data, at + 16);
    if (original_first_thunk == 0 && name_rva == 0 && first_thunk == 0) return out;

    auto name = read_cstring(pe, name_rva);
    if (!name) {
      warn(warnings, "import library name unreadable");
      return out;
    }
    ImportedLibrary lib{*name, {}};
    const std::uint32_t thunk_rva = original_first_thunk ? original_first_thunk : first_thunk;
    auto thunks = rva_to_offset(pe, thunk_rva);
    if (!thunks) {
      warn(warnings, "import thunk table unreadable for " + lib.name);
      out.push_back(std::move(lib));
      continue;
    }
    for (std::size_t t = 0; t < kMaxImportsPerLibrary; ++t) {
      const std::size_t th = *thunks + t * thunk_width;
      if (!fits(th, thunk_width, data.size())) {
        warn(warnings, "import thunk table truncated for " + lib.name);
        break;
      }
      const std::uint64_t value = thunk_width == 8 ? load_le<std::uint64_t>(data, th)
                                                   : load_le<std::uint32_t>(data, th);
      if (value == 0) break;
      if (value & ordinal_flag) {
        lib.functions.push_back({"", static_cast<std::uint16_t>(value & 0xFFFF)});
        continue;
      }
      auto fn = read_cstring(pe, static_cast<std::uint32_t>(value & 0x7FFFFFFF) + 2);
      if (!fn) {
        warn(warnings, "import name unreadable in " + lib.name);
        break;
      }
      lib.functions.push_back({*fn, std::nullopt});
    }
    out.push_back(std::move(lib));
  }
  warn(warnings, "import descriptor limit reached");
  return out;
}

std::vector<std::string> parse_exports(const PeFile& pe, std::vector<std::string>* warnings) {
  std::vector<std::string> out;
  const auto dir = pe.optional.directory(DataDirectoryIndex::exports);
  if (dir.virtual_address == 0) return out;
  auto base = rva_to_offset(pe, dir.virtual_address);
  ByteView data(pe.raw);
  if (!base || !fits(*base, 40, data.size())) {
    warn(warnings, "export directory not backed by file data");
    return out;
  }
  const auto number_of_names = load_le<std::uint32_t>(data, *base + 24);
  const auto address_of_names = load_le<std::uint32_t>(data, *base + 32);
  if (number_of_names > kMaxExports) warn(warnings, "export name count capped");
  auto names = rva_to_offset(pe, address_of_names);
  if (number_of_names > 0 && !names) {
    warn(warnings, "export name table unreadable");
    return out;
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(number_of_names, kMaxExports); ++i) {
    const std::size_t at = *names + i * 4;
    if (!fits(at, 4, data.size())) {
      warn(warnings, "export name table truncated");
      break;
    }
    auto name = read_cstring(pe, load_le<std::uint32_t>(data, at));
    if (!name) {
      warn(warnings, "export name unreadable");
      break;
    }
    out.push_back(*name);
  }
  return out;
}

}  // namespace peguard
