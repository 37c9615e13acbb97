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

// Portable Executable layout model.
//
// Supported subset: PE32 and PE32+. The parser reads the DOS header, the
// COFF and optional headers, the data directory table and the section table,
// and resolves the import and export directories on demand. Everything past
// the last section's raw data is overlay.
//
// Sections whose raw range runs past end of file are clamped to the file end
// and recorded in PeFile::warnings rather than rejected.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "peguard/bytes.hpp"

namespace peguard {

inline constexpr std::uint16_t kDosMagic = 0x5A4D;           // "MZ"
inline constexpr std::uint32_t kPeSignature = 0x00004550;    // "PE\0\0"
inline constexpr std::uint16_t kPe32Magic = 0x10B;
inline constexpr std::uint16_t kPe32PlusMagic = 0x20B;
inline constexpr std::size_t kDosHeaderSize = 0x40;
inline constexpr std::size_t kCoffHeaderSize = 20;
inline constexpr std::size_t kSectionHeaderSize = 40;
inline constexpr std::size_t kMaxSections = 96;
inline constexpr std::size_t kNumDataDirectories = 16;

inline constexpr std::uint32_t kScnCntCode = 0x00000020;
inline constexpr std::uint32_t kScnCntInitializedData = 0x00000040;
inline constexpr std::uint32_t kScnCntUninitializedData = 0x00000080;
inline constexpr std::uint32_t kScnMemExecute = 0x20000000;
inline constexpr std::uint32_t kScnMemRead = 0x40000000;
inline constexpr std::uint32_t kScnMemWrite = 0x80000000;

enum class DataDirectoryIndex : std::size_t {
  exports = 0,
  imports = 1,
  resources = 2,
  exceptions = 3,
  security = 4,
  base_relocations = 5,
  debug = 6,
  architecture = 7,
  global_ptr = 8,
  tls = 9,
  load_config = 10,
  bound_import = 11,
  iat = 12,
  delay_import = 13,
  clr_runtime = 14,
};

struct DosHeader {
  std::uint16_t magic = kDosMagic;
  std::uint32_t e_lfanew = 0;
};

struct CoffHeader {
  std::uint16_t machine = 0;
  std::uint16_t number_of_sections = 0;
  std::uint32_t time_date_stamp = 0;
  std::uint32_t pointer_to_symbol_table = 0;
  std::uint32_t number_of_symbols = 0;
  std::uint16_t size_of_optional_header = 0;
  std::uint16_t characteristics = 0;
};

struct DataDirectory {
  std::uint32_t virtual_address = 0;
  std::uint32_t size = 0;

  bool present() const { return virtual_address != 0 || size != 0; }
  friend bool operator==(const DataDirectory&, const DataDirectory&) = default;
};

struct OptionalHeader {
  std::uint16_t magic = kPe32Magic;
  std::uint32_t address_of_entry_point = 0;
  std::uint64_t image_base = 0;
  std::uint32_t section_alignment = 0;
  std::uint32_t file_alignment = 0;
  std::uint32_t size_of_image = 0;
  std::uint32_t size_of_headers = 0;
  std::uint32_t checksum = 0;
  std::uint32_t number_of_rva_and_sizes = 0;
  std::vector<DataDirectory> data_directories;

  bool is_pe32_plus() const { return magic == kPe32PlusMagic; }
  DataDirectory directory(DataDirectoryIndex index) const;
};

struct SectionHeader {
  std::array<char, 8> name{};
  std::uint32_t virtual_size = 0;
  std::uint32_t virtual_address = 0;
  std::uint32_t size_of_raw_data = 0;
  std::uint32_t pointer_to_raw_data = 0;
  std::uint32_t characteristics = 0;

  /// Name up to the first NUL.
  std::string name_string() const;
  void set_name(std::string_view n);
  /// Bytes the loader maps from the raw data: a zero virtual size means the
  /// raw size is used.
  std::uint32_t mapped_size() const {
    return virtual_size == 0 ? size_of_raw_data : virtual_size;
  }
};

struct SlackRegion {
  std::size_t section_index = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct ByteRange {
  std::size_t offset = 0;
  std::size_t length = 0;

  std::size_t end() const { return offset + length; }
  bool empty() const { return length == 0; }
};

/// Parsed PE image. Header fields hold the on-disk values verbatim;
/// raw_range() gives the clamped file range of a section.
struct PeFile {
  Bytes raw;
  DosHeader dos;
  CoffHeader coff;
  OptionalHeader optional;
  std::vector<SectionHeader> sections;
  std::size_t overlay_offset = 0;
  std::vector<std::string> warnings;

  std::size_t file_size() const { return raw.size(); }
  ByteView bytes() const { return raw; }

  std::size_t nt_headers_offset() const { return dos.e_lfanew; }
  std::size_t optional_header_offset() const { return dos.e_lfanew + 4 + kCoffHeaderSize; }
  std::size_t section_table_offset() const {
    return optional_header_offset() + coff.size_of_optional_header;
  }
  std::size_t section_table_end() const {
    return section_table_offset() + sections.size() * kSectionHeaderSize;
  }

  /// Raw file range of section \p index, clamped to the file.
  ByteRange raw_range(std::size_t index) const;
  ByteView section_bytes(std::size_t index) const;
  /// Sum of declared virtual sizes.
  std::uint64_t virtual_size() const;
};

struct ImportedFunction {
  std::string name;  // empty for ordinal imports
  std::optional<std::uint16_t> ordinal;
};

struct ImportedLibrary {
  std::string name;
  std::vector<ImportedFunction> functions;
};

/// Parses \p bytes; throws MalformedPe when the input is not a well-formed
/// PE32/PE32+ image.
PeFile parse_pe(ByteView bytes);
PeFile parse_pe(Bytes&& bytes);

/// One region per section whose raw size exceeds its virtual size, ordered
/// by file offset.
std::vector<SlackRegion> slack_regions(const PeFile& pe);

/// [overlay_offset, file length).
ByteRange overlay(const PeFile& pe);

/// Headers plus, per section, the first min(raw size, virtual size) raw
/// bytes, laid out contiguously in file order. The section table of the
/// result is rewritten to describe the compacted layout, so the output
/// parses and truncating it again is the identity.
Bytes truncate_to_virtual_size(const PeFile& pe);

struct PrintableString {
  std::size_t offset = 0;
  std::string text;
  friend bool operator==(const PrintableString&, const PrintableString&) = default;
};

inline constexpr std::size_t kDefaultMinStringLength = 5;

inline bool is_printable(std::uint8_t b) { return b >= 0x20 && b <= 0x7E; }

/// Maximal runs of printable ASCII (0x20-0x7E) of at least \p min_len bytes.
std::vector<PrintableString> extract_printable_strings(
    ByteView bytes, std::size_t min_len = kDefaultMinStringLength);

/// Writes the header model back over the raw bytes. Throws LayoutConflict
/// when the headers or sections overlap or leave the file.
Bytes serialize_pe(const PeFile& pe);

/// Maps an RVA to a file offset, or nullopt when it is not backed by file data.
std::optional<std::size_t> rva_to_offset(const PeFile& pe, std::uint32_t rva);

/// Import directory walk. Malformed tables stop the walk and append to
/// \p warnings when given.
std::vector<ImportedLibrary> parse_imports(const PeFile& pe,
                                           std::vector<std::string>* warnings = nullptr);
std::vector<std::string> parse_exports(const PeFile& pe,
                                       std::vector<std::string>* warnings = nullptr);

}  // namespace peguard
