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

#include "peguard/synth.hpp"

#include <algorithm>
#include <array>
#include <string_view>

namespace peguard::synth {
namespace {

constexpr std::string_view kDosStub =
    "\x0e\x1f\xba\x0e\x00\xb4\x09\xcd\x21\xb8\x01\x4c\xcd\x21"
    "This program cannot be run in DOS mode.\r\r\n$";

void put(Bytes& out, std::size_t at, std::string_view s) {
  if (out.size() < at + s.size()) out.resize(at + s.size());
  std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(at));
}

template <typename T>
void put_le(Bytes& out, std::size_t at, T value) {
  if (out.size() < at + sizeof(T)) out.resize(at + sizeof(T));
  store_le<T>(out, at, value);
}

struct BuiltSection {
  SectionSpec spec;
  std::uint32_t va = 0;
  std::uint32_t vsize = 0;
  std::uint32_t raw_size = 0;
  std::uint32_t raw_ptr = 0;
};

Bytes build_idata(const std::vector<ImportSpec>& imports, std::uint32_t va, bool pe32_plus,
                  DataDirectory& import_dir, DataDirectory& iat_dir) {
  const std::size_t w = pe32_plus ? 8 : 4;
  const std::size_t desc_size = (imports.size() + 1) * 20;
  std::size_t cursor = desc_size;
  std::vector<std::size_t> ilt(imports.size()), iat(imports.size());
  for (std::size_t i = 0; i < imports.size(); ++i) {
    ilt[i] = cursor;
    cursor += (imports[i].functions.size() + 1) * w;
  }
  const std::size_t iat_begin = cursor;
  for (std::size_t i = 0; i < imports.size(); ++i) {
    iat[i] = cursor;
    cursor += (imports[i].functions.size() + 1) * w;
  }
  const std::size_t iat_end = cursor;

  Bytes out(cursor, 0);
  for (std::size_t i = 0; i < imports.size(); ++i) {
    for (std::size_t f = 0; f < imports[i].functions.size(); ++f) {
      cursor = align_up(cursor, 2);
      const std::uint64_t hint_rva = va + cursor;
      put_le<std::uint16_t>(out, cursor, static_cast<std::uint16_t>(f));
      put(out, cursor + 2, imports[i].functions[f]);
      cursor += 2 + imports[i].functions[f].size();
      put_le<std::uint8_t>(out, cursor++, 0);
      if (w == 8) {
        put_le<std::uint64_t>(out, ilt[i] + f * w, hint_rva);
        put_le<std::uint64_t>(out, iat[i] + f * w, hint_rva);
      } else {
        put_le<std::uint32_t>(out, ilt[i] + f * w, static_cast<std::uint32_t>(hint_rva));
        put_le<std::uint32_t>(out, iat[i] + f * w, static_cast<std::uint32_t>(hint_rva));
      }
    }
  }
  for (std::size_t i = 0; i < imports.size(); ++i) {
    const std::uint32_t name_rva = static_cast<std::uint32_t>(va + cursor);
    put(out, cursor, imports[i].library);
    cursor += imports[i].library.size();
    put_le<std::uint8_t>(out, cursor++, 0);
    const std::size_t d = i * 20;
    put_le<std::uint32_t>(out, d, static_cast<std::uint32_t>(va + ilt[i]));
    put_le<std::uint32_t>(out, d + 12, name_rva);
    put_le<std::uint32_t>(out, d + 16, static_cast<std::uint32_t>(va + iat[i]));
  }
  import_dir = {va, static_cast<std::uint32_t>(desc_size)};
  iat_dir = {static_cast<std::uint32_t>(va + iat_begin),
             static_cast<std::uint32_t>(iat_end - iat_begin)};
  return out;
}

Bytes build_edata(std::vector<std::string> names, const std::string& dll_name, std::uint32_t va,
                  std::uint32_t code_va, std::uint32_t timestamp, DataDirectory& export_dir) {
  std::sort(names.begin(), names.end());
  const std::size_t m = names.size();
  const std::size_t eat = 40;
  const std::size_t npt = eat + m * 4;
  const std::size_t ords = npt + m * 4;
  std::size_t cursor = ords + m * 2;
  Bytes out(cursor, 0);
  put_le<std::uint32_t>(out, 4, timestamp);
  put_le<std::uint32_t>(out, 16, 1);
  put_le<std::uint32_t>(out, 20, static_cast<std::uint32_t>(m));
  put_le<std::uint32_t>(out, 24, static_cast<std::uint32_t>(m));
  put_le<std::uint32_t>(out, 28, static_cast<std::uint32_t>(va + eat));
  put_le<std::uint32_t>(out, 32, static_cast<std::uint32_t>(va + npt));
  put_le<std::uint32_t>(out, 36, static_cast<std::uint32_t>(va + ords));
  put_le<std::uint32_t>(out, 12, static_cast<std::uint32_t>(va + cursor));
  put(out, cursor, dll_name);
  cursor += dll_name.size();
  put_le<std::uint8_t>(out, cursor++, 0);
  for (std::size_t i = 0; i < m; ++i) {
    put_le<std::uint32_t>(out, eat + i * 4, static_cast<std::uint32_t>(code_va + i * 16));
    put_le<std::uint32_t>(out, npt + i * 4, static_cast<std::uint32_t>(va + cursor));
    put_le<std::uint16_t>(out, ords + i * 2, static_cast<std::uint16_t>(i));
    put(out, cursor, names[i]);
    cursor += names[i].size();
    put_le<std::uint8_t>(out, cursor++, 0);
  }
  export_dir = {va, static_cast<std::uint32_t>(cursor)};
  return out;
}

}  // namespace

Bytes random_bytes(Rng& rng, std::size_t n) {
  Bytes out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.next());
  return out;
}

Bytes build_pe(const FixtureSpec& spec) {
  const std::size_t opt_size = spec.pe32_plus ? 240 : 224;
  std::vector<BuiltSection> built;
  for (const auto& s : spec.sections) built.push_back({s});
  const std::size_t extra = (spec.imports.empty() ? 0 : 1) + (spec.exports.empty() ? 0 : 1);
  const std::size_t nsec = built.size() + extra;
  const std::uint32_t headers = static_cast<std::uint32_t>(
      align_up(kLfanew + 4 + kCoffHeaderSize + opt_size + nsec * kSectionHeaderSize, kFileAlignment));

  std::array<DataDirectory, kNumDataDirectories> dirs{};
  std::uint32_t va = kSectionAlignment;
  auto place_va = [&](BuiltSection& b) {
    b.va = va;
    b.vsize = b.spec.virtual_size.value_or(static_cast<std::uint32_t>(b.spec.data.size()));
    va = static_cast<std::uint32_t>(
        align_up(va + std::max<std::uint32_t>(b.vsize, 1), kSectionAlignment));
  };
  for (auto& b : built) place_va(b);

  std::uint32_t code_va = built.empty() ? kSectionAlignment : built.front().va;
  for (const auto& b : built) {
    if (b.spec.characteristics & (kScnCntCode | kScnMemExecute)) {
      code_va = b.va;
      break;
    }
  }
  if (!spec.imports.empty()) {
    BuiltSection b{{".idata", {}, kScnCntInitializedData | kScnMemRead | kScnMemWrite, {}}};
    b.spec.data = build_idata(spec.imports, va, spec.pe32_plus,
                              dirs[static_cast<std::size_t>(DataDirectoryIndex::imports)],
                              dirs[static_cast<std::size_t>(DataDirectoryIndex::iat)]);
    place_va(b);
    built.push_back(std::move(b));
  }
  if (!spec.exports.empty()) {
    BuiltSection b{{".edata", {}, kScnCntInitializedData | kScnMemRead, {}}};
    b.spec.data = build_edata(spec.exports, spec.dll_name, va, code_va, spec.timestamp,
                              dirs[static_cast<std::size_t>(DataDirectoryIndex::exports)]);
    place_va(b);
    built.push_back(std::move(b));
  }
  if (spec.debug) dirs[static_cast<std::size_t>(DataDirectoryIndex::debug)] = *spec.debug;

  std::uint32_t raw = headers;
  for (auto& b : built) {
    b.raw_size = static_cast<std::uint32_t>(align_up(b.spec.data.size(), kFileAlignment));
    b.raw_ptr = b.raw_size ? raw : 0;
    raw += b.raw_size;
  }

  Bytes out(raw, 0);
  put_le<std::uint16_t>(out, 0, kDosMagic);
  put_le<std::uint16_t>(out, 2, 0x90);
  put_le<std::uint16_t>(out, 4, 3);
  put_le<std::uint16_t>(out, 8, 4);
  put_le<std::uint16_t>(out, 0x0C, 0xFFFF);
  put_le<std::uint16_t>(out, 0x10, 0xB8);
  put_le<std::uint16_t>(out, 0x18, 0x40);
  put_le<std::uint32_t>(out, 0x3C, kLfanew);
  put(out, 0x40, kDosStub);

  const std::size_t coff = kLfanew + 4;
  put_le<std::uint32_t>(out, kLfanew, kPeSignature);
  put_le<std::uint16_t>(out, coff, spec.pe32_plus ? 0x8664 : 0x14C);
  put_le<std::uint16_t>(out, coff + 2, static_cast<std::uint16_t>(nsec));
  put_le<std::uint32_t>(out, coff + 4, spec.timestamp);
  put_le<std::uint16_t>(out, coff + 16, static_cast<std::uint16_t>(opt_size));
  std::uint16_t characteristics = spec.pe32_plus ? 0x0022 : 0x0102;
  if (!spec.exports.empty()) characteristics |= 0x2000;
  put_le<std::uint16_t>(out, coff + 18, characteristics);

  std::uint32_t size_of_code = 0, size_of_data = 0;
  for (const auto& b : built) {
    if (b.spec.characteristics & kScnCntCode) size_of_code += b.raw_size;
    else size_of_data += b.raw_size;
  }
  const std::size_t opt = coff + kCoffHeaderSize;
  put_le<std::uint16_t>(out, opt, spec.pe32_plus ? kPe32PlusMagic : kPe32Magic);
  put_le<std::uint8_t>(out, opt + 2, 14);
  put_le<std::uint32_t>(out, opt + 4, size_of_code);
  put_le<std::uint32_t>(out, opt + 8, size_of_data);
  put_le<std::uint32_t>(out, opt + 16, code_va);
  put_le<std::uint32_t>(out, opt + 20, code_va);
  if (spec.pe32_plus) {
    put_le<std::uint64_t>(out, opt + 24, 0x140000000ULL);
  } else {
    put_le<std::uint32_t>(out, opt + 24, code_va);
    put_le<std::uint32_t>(out, opt + 28, 0x400000);
  }
  put_le<std::uint32_t>(out, opt + 32, kSectionAlignment);
  put_le<std::uint32_t>(out, opt + 36, kFileAlignment);
  put_le<std::uint16_t>(out, opt + 40, 6);
  put_le<std::uint16_t>(out, opt + 48, 6);
  put_le<std::uint32_t>(out, opt + 56, va);
  put_le<std::uint32_t>(out, opt + 60, headers);
  put_le<std::uint16_t>(out, opt + 68, spec.subsystem);
  put_le<std::uint16_t>(out, opt + 70, 0x8160);
  std::size_t stack = opt + 72;
  const std::size_t word = spec.pe32_plus ? 8 : 4;
  for (std::uint64_t v : {0x100000ULL, 0x1000ULL, 0x100000ULL, 0x1000ULL}) {
    if (word == 8) put_le<std::uint64_t>(out, stack, v);
    else put_le<std::uint32_t>(out, stack, static_cast<std::uint32_t>(v));
    stack += word;
  }
  const std::size_t nrva = spec.pe32_plus ? opt + 108 : opt + 92;
  put_le<std::uint32_t>(out, nrva, kNumDataDirectories);
  for (std::size_t i = 0; i < kNumDataDirectories; ++i) {
    put_le<std::uint32_t>(out, nrva + 4 + i * 8, dirs[i].virtual_address);
    put_le<std::uint32_t>(out, nrva + 8 + i * 8, dirs[i].size);
  }

  const std::size_t table = opt + opt_size;
  for (std::size_t i = 0; i < built.size(); ++i) {
    const auto& b = built[i];
    const std::size_t at = table + i * kSectionHeaderSize;
    put(out, at, b.spec.name.substr(0, 8));
    put_le<std::uint32_t>(out, at + 8, b.vsize);
    put_le<std::uint32_t>(out, at + 12, b.va);
    put_le<std::uint32_t>(out, at + 16, b.raw_size);
    put_le<std::uint32_t>(out, at + 20, b.raw_ptr);
    put_le<std::uint32_t>(out, at + 36, b.spec.characteristics);
    std::copy(b.spec.data.begin(), b.spec.data.end(),
              out.begin() + static_cast<std::ptrdiff_t>(b.raw_ptr));
  }
  out.insert(out.end(), spec.overlay.begin(), spec.overlay.end());
  return out;
}

// ---------------------------------------------------------------------------
// Content generators

namespace {

struct Idiom {
  std::string_view bytes;  // hex, "??" = random byte
};

Bytes hex_to_bytes(Rng& rng, std::string_view hex) {
  Bytes out;
  for (std::size_t i = 0; i + 1 < hex.size();) {
    if (hex[i] == ' ') {
      ++i;
      continue;
    }
    if (hex[i] == '?') {
      out.push_back(static_cast<std::uint8_t>(rng.next()));
    } else {
      out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
    }
    i += 2;
  }
  return out;
}

// Common compiler-emitted instruction shapes.
constexpr std::array<std::string_view, 22> kBenignOps = {
    "55 8B EC",       "83 EC ??",       "8B 45 ??",    "89 45 ??",    "E8 ?? ?? 00 00",
    "FF 15 ?? ?? 40 00", "C3",          "5D",          "33 C0",       "85 C0 74 ??",
    "6A ??",          "50",             "51",          "8D 4D ??",    "C7 45 ?? ?? ?? 00 00",
    "8B E5",          "5E",             "56",          "57",          "3B C1 75 ??",
    "8B 4D ??",       "0F B6 45 ??",
};

constexpr std::array<std::string_view, 4> kPadOps = {"CC CC CC CC", "90 90", "CC", "00 00"};

void emit_code(Rng& rng, Bytes& out, std::size_t size) {
  while (out.size() < size) {
    int body = static_cast<int>(rng.between(4, 30));
    for (int i = 0; i < body && out.size() < size; ++i) {
      auto b = hex_to_bytes(rng, rng.pick(kBenignOps));
      out.insert(out.end(), b.begin(), b.end());
    }
    auto pad = hex_to_bytes(rng, rng.pick(kPadOps));
    out.insert(out.end(), pad.begin(), pad.end());
  }
  out.resize(size);
}

// Family-specific code idioms, spliced into generated code.
struct Family {
  std::string_view name;
  std::vector<std::string_view> idioms;
  std::vector<ImportSpec> imports;
  std::vector<std::string_view> strings;
};

const std::vector<Family>& malware_families() {
  static const std::vector<Family> kFamilies = {
      {"injector",
       {"6A 40 68 00 30 00 00", "64 A1 30 00 00 00 8B 40 0C", "FF 75 ?? FF 15 ?? ?? 40 00 85 C0 0F 84"},
       {{"kernel32.dll",
         {"OpenProcess", "VirtualAllocEx", "WriteProcessMemory", "CreateRemoteThread",
          "GetProcAddress", "LoadLibraryA"}},
        {"ntdll.dll", {"NtUnmapViewOfSection", "NtResumeThread"}}},
       {"explorer.exe", "svchost.exe", "SeDebugPrivilege", "\\\\.\\pipe\\msupd", "inject ok"}},
      {"downloader",
       {"C1 CF 0D 03 F8", "68 ?? ?? ?? ?? 68 ?? ?? ?? ?? 6A 00 FF 15", "E2 F5 8B 45 ??"},
       {{"urlmon.dll", {"URLDownloadToFileA"}},
        {"wininet.dll", {"InternetOpenA", "InternetOpenUrlA", "InternetReadFile"}},
        {"shell32.dll", {"ShellExecuteA"}}},
       {"http://185.12.44.7/gate.php", "http://update-srv.ru/load.exe", "User-Agent: Mozilla/4.0",
        "%TEMP%\\svchost32.exe", "cmd.exe /c start"}},
      {"ransomware",
       {"63 7C 77 7B F2 6B 6F C5 30 01 67 2B", "8A 04 0E 34 ?? 88 04 0E 46 3B F1 72 F4",
        "0F 31 33 C2"},
       {{"advapi32.dll", {"CryptAcquireContextA", "CryptGenKey", "CryptEncrypt"}},
        {"kernel32.dll", {"FindFirstFileW", "FindNextFileW", "MoveFileExW", "DeleteFileW"}}},
       {"vssadmin.exe delete shadows /all /quiet", "Your files have been encrypted",
        "README_DECRYPT.txt", ".locked", "bitcoin wallet"}},
      {"packed",
       {"60 BE ?? ?? ?? 00 8D BE ?? ?? ?? FF 57", "8A 06 46 88 07 47 01 DB 75 07", "61 E9"},
       {{"kernel32.dll", {"LoadLibraryA", "GetProcAddress", "VirtualProtect", "ExitProcess"}}},
       {}},
      {"stealer",
       {},
       {{"kernel32.dll", {"CreateFileW", "ReadFile", "CloseHandle", "GetModuleHandleW"}},
        {"crypt32.dll", {"CryptUnprotectData"}},
        {"user32.dll", {"GetWindowTextW"}}},
       {"\\Google\\Chrome\\User Data\\Default\\Login Data",
        "SELECT origin_url, username_value, password_value FROM logins",
        "\\Mozilla\\Firefox\\Profiles", "wallet.dat", "HKEY_CURRENT_USER\\Software\\Valve\\Steam"}},
  };
  return kFamilies;
}

const std::vector<ImportSpec>& benign_import_pool() {
  static const std::vector<ImportSpec> kPool = {
      {"kernel32.dll",
       {"GetModuleHandleW", "CreateFileW", "ReadFile", "WriteFile", "CloseHandle",
        "GetLastError", "HeapAlloc", "HeapFree", "GetProcessHeap", "ExitProcess",
        "GetCommandLineW", "GetStartupInfoW", "Sleep", "GetTickCount", "MultiByteToWideChar",
        "WideCharToMultiByte", "GetSystemTimeAsFileTime", "QueryPerformanceCounter"}},
      {"user32.dll",
       {"MessageBoxW", "CreateWindowExW", "ShowWindow", "UpdateWindow", "GetMessageW",
        "DispatchMessageW", "TranslateMessage", "DefWindowProcW", "RegisterClassExW",
        "LoadIconW", "LoadCursorW", "PostQuitMessage"}},
      {"gdi32.dll", {"CreateFontW", "SelectObject", "DeleteObject", "BitBlt", "TextOutW"}},
      {"advapi32.dll", {"RegOpenKeyExW", "RegQueryValueExW", "RegCloseKey"}},
      {"msvcrt.dll", {"malloc", "free", "memcpy", "memset", "printf", "strlen", "_exit"}},
      {"comctl32.dll", {"InitCommonControlsEx"}},
      {"shell32.dll", {"SHGetFolderPathW", "ShellExecuteW"}},
      {"ole32.dll", {"CoInitializeEx", "CoCreateInstance", "CoUninitialize"}},
  };
  return kPool;
}

constexpr std::array<std::string_view, 40> kBenignWords = {
    "File",     "Edit",     "View",      "Help",      "Options",   "Settings", "Open",
    "Save",     "Close",    "Print",     "Preview",   "Document",  "Window",   "Toolbar",
    "Status",   "Ready",    "Cancel",    "Apply",     "Version",   "Update",   "Install",
    "License",  "Agreement", "Language", "Default",   "Profile",   "Recent",   "Export",
    "Import",   "Format",   "Font",      "Color",     "Undo",      "Redo",     "Search",
    "Replace",  "Select",   "Properties", "Advanced", "Configuration"};

std::string benign_string(Rng& rng) {
  switch (rng.between(0, 7)) {
    case 0:
      return "Copyright (C) " + std::to_string(rng.between(1998, 2019)) + " " +
             std::string(rng.pick(kBenignWords)) + " Software Corporation";
    case 1:
      return "C:\\Program Files\\" + std::string(rng.pick(kBenignWords)) + "\\" +
             std::string(rng.pick(kBenignWords)) + ".dll";
    case 2:
      return "Software\\" + std::string(rng.pick(kBenignWords)) + "\\" +
             std::string(rng.pick(kBenignWords));
    case 3:
      return "https://www." + std::string(rng.pick(kBenignWords)) + "soft.com/help";
    default: {
      std::string s;
      const auto words = rng.between(2, 5);
      for (std::uint64_t i = 0; i < words; ++i) {
        if (i) s += ' ';
        s += rng.pick(kBenignWords);
      }
      return s + (rng.chance(0.3) ? "..." : "");
    }
  }
}

void emit_strings(Rng& rng, Bytes& out, std::size_t size, const std::vector<std::string>& pool,
                  double binary_fraction) {
  while (out.size() < size) {
    if (rng.chance(binary_fraction)) {
      const auto n = rng.between(4, 48);
      for (std::uint64_t i = 0; i < n; ++i) {
        out.push_back(rng.chance(0.5) ? 0 : static_cast<std::uint8_t>(rng.between(0, 31)));
      }
      continue;
    }
    const auto& s = pool.empty() ? benign_string(rng) : rng.pick(pool);
    out.insert(out.end(), s.begin(), s.end());
    out.push_back(0);
    if (rng.chance(0.5)) out.push_back(0);
  }
  out.resize(size);
}

Bytes resource_blob(Rng& rng, std::size_t size) {
  // Icon-like data: runs of palette indices with moderate entropy.
  Bytes out;
  while (out.size() < size) {
    const auto value = static_cast<std::uint8_t>(rng.between(0, 63) * 4);
    const auto run = rng.between(1, 12);
    for (std::uint64_t i = 0; i < run; ++i) out.push_back(value);
  }
  out.resize(size);
  return out;
}

std::vector<ImportSpec> pick_benign_imports(Rng& rng, std::size_t libraries) {
  const auto& pool = benign_import_pool();
  std::vector<ImportSpec> out;
  out.push_back(pool[0]);
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i < pool.size(); ++i) idx.push_back(i);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  for (std::size_t i = 0; i + 1 < libraries && i < idx.size(); ++i) out.push_back(pool[idx[i]]);
  for (auto& lib : out) {
    std::shuffle(lib.functions.begin(), lib.functions.end(), rng.engine());
    lib.functions.resize(std::max<std::size_t>(1, rng.between(lib.functions.size() / 2,
                                                              lib.functions.size())));
  }
  return out;
}

void merge_imports(std::vector<ImportSpec>& into, const ImportSpec& add) {
  for (auto& lib : into) {
    if (lib.library == add.library) {
      for (const auto& f : add.functions) {
        if (std::find(lib.functions.begin(), lib.functions.end(), f) == lib.functions.end()) {
          lib.functions.push_back(f);
        }
      }
      return;
    }
  }
  into.push_back(add);
}

void splice(Rng& rng, Bytes& code, std::string_view idiom) {
  if (code.size() < 64) return;
  auto bytes = hex_to_bytes(rng, idiom);
  const auto at = rng.between(0, code.size() - bytes.size() - 1);
  std::copy(bytes.begin(), bytes.end(), code.begin() + static_cast<std::ptrdiff_t>(at));
}

std::size_t unaligned(Rng& rng, std::size_t lo, std::size_t hi) {
  auto n = rng.between(lo, hi);
  if (n % kFileAlignment == 0) ++n;
  return n;
}

}  // namespace

FixtureSpec random_fixture_spec(std::uint64_t seed, const FixtureOptions& options) {
  Rng rng(seed);
  FixtureSpec spec;
  spec.pe32_plus = options.pe32_plus;
  spec.timestamp = static_cast<std::uint32_t>(0x50000000 + rng.between(0, 0x10000000));
  auto size_for = [&](std::size_t lo, std::size_t hi) {
    if (options.slack) return unaligned(rng, lo, hi);
    return static_cast<std::size_t>(align_up(rng.between(lo, hi), kFileAlignment));
  };
  static constexpr std::array<std::string_view, 6> kNames = {".text", ".rdata", ".data",
                                                             ".rsrc", ".reloc", ".tls"};
  for (int i = 0; i < options.num_sections; ++i) {
    SectionSpec s;
    s.name = i < static_cast<int>(kNames.size()) ? std::string(kNames[i]) : ".s" + std::to_string(i);
    if (i == 0) {
      s.characteristics = kScnCntCode | kScnMemExecute | kScnMemRead;
      emit_code(rng, s.data, size_for(0x300, 0x1800));
    } else if (s.name == ".rsrc") {
      s.data = resource_blob(rng, size_for(0x200, 0x1000));
    } else {
      emit_strings(rng, s.data, size_for(0x200, 0x1000), {}, 0.3);
      if (s.name == ".data") s.characteristics |= kScnMemWrite;
    }
    spec.sections.push_back(std::move(s));
  }
  if (options.imports) spec.imports = pick_benign_imports(rng, rng.between(1, 3));
  if (options.exports) {
    for (int i = 0; i < 4; ++i) spec.exports.push_back("Export" + std::to_string(rng.between(0, 999)));
    spec.exports.erase(std::unique(spec.exports.begin(), spec.exports.end()), spec.exports.end());
  }
  if (options.debug) spec.debug = DataDirectory{0x3000, 0x54};
  if (options.overlay_size) spec.overlay = random_bytes(rng, options.overlay_size);
  return spec;
}

Bytes make_fixture(std::uint64_t seed, const FixtureOptions& options) {
  return build_pe(random_fixture_spec(seed, options));
}

DeskSample generate_desk_sample(std::uint64_t seed, Profile profile, int year) {
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(year) * 7919 +
          (profile == Profile::malware ? 1 : 0));
  DeskSample sample;
  sample.label = profile == Profile::malware ? 1 : 0;
  sample.year = year;

  FixtureSpec spec;
  spec.pe32_plus = rng.chance(0.3);
  spec.timestamp = static_cast<std::uint32_t>(0x55000000 + rng.between(0, 0x0A000000));
  spec.subsystem = rng.chance(0.7) ? 2 : 3;

  SectionSpec text{".text", {}, kScnCntCode | kScnMemExecute | kScnMemRead, {}};
  emit_code(rng, text.data, unaligned(rng, 0x1000, 0x6000));

  std::vector<std::string> strings;
  const auto nstrings = rng.between(20, 80);
  for (std::uint64_t i = 0; i < nstrings; ++i) strings.push_back(benign_string(rng));

  if (profile == Profile::benign) {
    static constexpr std::array<std::string_view, 4> kKinds = {"gui", "console", "library",
                                                               "installer"};
    sample.family = std::string(rng.pick(kKinds));
    spec.imports = pick_benign_imports(rng, rng.between(2, 5));
    if (rng.chance(0.08)) {
      merge_imports(spec.imports, {"kernel32.dll", {"VirtualAlloc", "CreateProcessW"}});
    }
    if (rng.chance(0.05)) strings.push_back("cmd.exe /c");
    if (sample.family == "library") {
      for (int i = 0; i < static_cast<int>(rng.between(3, 12)); ++i) {
        spec.exports.push_back(std::string(rng.pick(kBenignWords)) +
                               std::string(rng.pick(kBenignWords)) + std::to_string(i));
      }
      spec.dll_name = std::string(rng.pick(kBenignWords)) + ".dll";
    }
    spec.sections.push_back(std::move(text));
    SectionSpec rdata{".rdata", {}, kScnCntInitializedData | kScnMemRead, {}};
    emit_strings(rng, rdata.data, unaligned(rng, 0x800, 0x3000), strings, 0.25);
    spec.sections.push_back(std::move(rdata));
    SectionSpec data{".data", {}, kScnCntInitializedData | kScnMemRead | kScnMemWrite, {}};
    emit_strings(rng, data.data, unaligned(rng, 0x200, 0x1000), strings, 0.6);
    spec.sections.push_back(std::move(data));
    if (sample.family == "gui" || sample.family == "installer" || rng.chance(0.3)) {
      spec.sections.push_back(
          {".rsrc", resource_blob(rng, unaligned(rng, 0x400, 0x4000)),
           kScnCntInitializedData | kScnMemRead, {}});
    }
    if (rng.chance(0.04)) {
      // Benign software shipped with a runtime packer.
      spec.sections.insert(spec.sections.begin(),
                           {"UPX1", random_bytes(rng, unaligned(rng, 0x2000, 0x6000)),
                            kScnCntCode | kScnMemExecute | kScnMemRead | kScnMemWrite, {}});
    }
    if (rng.chance(0.4)) spec.debug = DataDirectory{0x2000, 0x1C};
    if (sample.family == "installer") {
      spec.overlay = resource_blob(rng, rng.between(0x200, 0xC00));
    } else if (rng.chance(0.15)) {
      spec.overlay = random_bytes(rng, rng.between(0x100, 0x600));
    }
  } else {
    const auto& families = malware_families();
    std::size_t fi = rng.between(0, families.size() - 1);
    if (year >= 2018 && rng.chance(0.3)) fi = rng.chance(0.5) ? 2 : 3;
    const auto& family = families[fi];
    sample.family = std::string(family.name);

    spec.imports = pick_benign_imports(rng, rng.between(1, 3));
    for (const auto& add : family.imports) {
      ImportSpec subset = add;
      std::shuffle(subset.functions.begin(), subset.functions.end(), rng.engine());
      subset.functions.resize(std::max<std::size_t>(1, rng.between(subset.functions.size() / 2,
                                                                   subset.functions.size())));
      if (family.name == "stealer" && subset.library == "crypt32.dll" && rng.chance(0.5)) continue;
      merge_imports(spec.imports, subset);
    }
    for (const auto& s : family.strings) {
      if (rng.chance(0.7)) strings.push_back(std::string(s));
    }
    if (rng.chance(0.3)) strings.push_back("HKEY_CURRENT_USER\\Software\\Microsoft\\Windows\\CurrentVersion\\Run");
    for (const auto& idiom : family.idioms) {
      const auto copies = rng.chance(0.75) ? rng.between(1, 4) : 0;
      for (std::uint64_t c = 0; c < copies; ++c) splice(rng, text.data, idiom);
    }

    if (family.name == "packed") {
      SectionSpec upx0{"UPX0", {}, kScnCntUninitializedData | kScnMemExecute | kScnMemRead | kScnMemWrite,
                       static_cast<std::uint32_t>(rng.between(0x8000, 0x20000))};
      SectionSpec upx1{"UPX1", random_bytes(rng, unaligned(rng, 0x2000, 0x8000)),
                       kScnCntInitializedData | kScnMemExecute | kScnMemRead | kScnMemWrite, {}};
      // Unpacking stub at the end of the packed blob.
      Bytes stub;
      emit_code(rng, stub, 0x200);
      for (const auto& idiom : family.idioms) splice(rng, stub, idiom);
      std::copy(stub.begin(), stub.end(), upx1.data.end() - static_cast<std::ptrdiff_t>(stub.size()));
      spec.sections.push_back(std::move(upx0));
      spec.sections.push_back(std::move(upx1));
      SectionSpec rsrc{".rsrc", resource_blob(rng, unaligned(rng, 0x400, 0x1000)),
                       kScnCntInitializedData | kScnMemRead, {}};
      spec.sections.push_back(std::move(rsrc));
    } else {
      if (rng.chance(0.3)) text.characteristics |= kScnMemWrite;
      spec.sections.push_back(std::move(text));
      SectionSpec rdata{".rdata", {}, kScnCntInitializedData | kScnMemRead, {}};
      emit_strings(rng, rdata.data, unaligned(rng, 0x600, 0x2000), strings, 0.3);
      spec.sections.push_back(std::move(rdata));
      SectionSpec data{".data", {}, kScnCntInitializedData | kScnMemRead | kScnMemWrite, {}};
      if (rng.chance(0.5)) {
        // Encrypted configuration blob.
        data.data = random_bytes(rng, unaligned(rng, 0x400, 0x2000));
      } else {
        emit_strings(rng, data.data, unaligned(rng, 0x200, 0x800), strings, 0.6);
      }
      spec.sections.push_back(std::move(data));
      if (rng.chance(0.3)) {
        spec.sections.push_back({".rsrc", resource_blob(rng, unaligned(rng, 0x400, 0x2000)),
                                 kScnCntInitializedData | kScnMemRead, {}});
      }
    }
    if (rng.chance(0.1)) spec.overlay = random_bytes(rng, rng.between(0x100, 0x400));
  }
  sample.bytes = build_pe(spec);
  return sample;
}

Bytes benign_donor(std::uint64_t seed) {
  Rng rng(seed ^ 0xD0D0D0D0ULL);
  FixtureSpec spec;
  spec.imports = pick_benign_imports(rng, 4);
  SectionSpec text{".text", {}, kScnCntCode | kScnMemExecute | kScnMemRead, {}};
  emit_code(rng, text.data, 0x2000);
  spec.sections.push_back(std::move(text));
  std::vector<std::string> strings;
  for (int i = 0; i < 400; ++i) strings.push_back(benign_string(rng));
  SectionSpec rdata{".rdata", {}, kScnCntInitializedData | kScnMemRead, {}};
  emit_strings(rng, rdata.data, 0x8000, strings, 0.05);
  spec.sections.push_back(std::move(rdata));
  spec.sections.push_back({".rsrc", resource_blob(rng, 0x2000), kScnCntInitializedData | kScnMemRead, {}});
  return build_pe(spec);
}

std::string desk_rule_text() {
  return R"(// Family signatures for the synthetic desk corpus.

rule Injector_RemoteThread {
  strings:
    $alloc = { 6A 40 68 00 30 00 00 }
    $peb = { 64 A1 30 00 00 00 8B 40 0C }
    $api = "WriteProcessMemory"
  condition:
    ($alloc and $peb) or ($api and $peb)
}

rule Downloader_ApiHash {
  strings:
    $ror13 = { C1 CF 0D 03 F8 }
    $gate = "gate.php"
    $ua = "User-Agent: Mozilla/4.0" nocase
  condition:
    2 of them
}

rule Ransom_Note {
  strings:
    $vss = "vssadmin.exe delete shadows" nocase
    $note = "Your files have been encrypted"
    $sbox = { 63 7C 77 7B F2 6B 6F C5 30 01 67 2B }
  condition:
    any of them
}

rule Packer_StubLoop {
  strings:
    $pushad = { 60 BE ?? ?? ?? 00 8D BE }
    $loop = { 8A 06 46 88 07 47 01 DB 75 07 }
  condition:
    all of them
}

rule Stealer_Browser {
  strings:
    $sql = "password_value FROM logins"
    $chrome = "User Data\\Default\\Login Data"
  condition:
    $sql or $chrome
}

// Too generic: these also hit benign software.
rule Generic_DosStub {
  strings:
    $stub = "This program cannot be run in DOS mode"
  condition:
    any of them
}

rule Generic_CmdShell {
  strings:
    $cmd = "cmd.exe /c" nocase
  condition:
    any of them
}

rule Generic_Kernel32 {
  strings:
    $k = "kernel32.dll" nocase
  condition:
    $k
}

rule Unused_NeverSeen {
  strings:
    $x = { DE AD BE EF 13 37 C0 DE }
  condition:
    $x
}
)";
}

}  // namespace peguard::synth
