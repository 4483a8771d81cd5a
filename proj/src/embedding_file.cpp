/*
 * Copyright 2026 The capalign Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "embedding_file.hpp"

#include <bit>
#include <cstring>
#include <filesystem>

#include "error.hpp"

namespace capalign {

namespace {

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(b[i], b[sizeof(T) - 1 - i]);
    }
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return byteswap_if_big(v);
}

[[noreturn]] void truncated(const std::string& path, std::uint64_t offset) {
  throw IndexedError(ErrorCode::kTruncated, offset,
                     path + ": truncated at byte offset " +
                         std::to_string(offset));
}

}  // namespace

void InMemoryEmbeddings::insert(std::string id, TokenEmbeddings m) {
  if (!m.empty() && m.dim() != dim_) {
    throw Error(ErrorCode::kDimMismatch,
                "entry '" + id + "' has dim " + std::to_string(m.dim()) +
                    ", expected " + std::to_string(dim_));
  }
  entries_.insert_or_assign(std::move(id), std::move(m));
}

std::optional<TokenEmbeddings> InMemoryEmbeddings::find(
    std::string_view id) const {
  auto it = entries_.find(std::string(id));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

EmbeddingWriter::EmbeddingWriter(const std::string& path, std::uint32_t dim)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), dim_(dim) {
  if (dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, "embedding dim must be >= 1");
  }
  if (!out_) throw Error(ErrorCode::kIoFailure, "cannot write " + path);
  out_.write(kEmbeddingMagic, 4);
  put<std::uint32_t>(out_, kEmbeddingVersion);
  put<std::uint32_t>(out_, dim_);
  put<std::uint64_t>(out_, 0);
}

EmbeddingWriter::~EmbeddingWriter() {
  if (!finished_) {
    try {
      finish();
    } catch (...) {
    }
  }
}

void EmbeddingWriter::add(std::string_view id, const TokenEmbeddings& m) {
  if (finished_) {
    throw Error(ErrorCode::kInvalidArgument, "writer already finished");
  }
  if (!m.empty() && m.dim() != dim_) {
    throw Error(ErrorCode::kDimMismatch,
                "entry '" + std::string(id) + "' has dim " +
                    std::to_string(m.dim()) + ", file dim " +
                    std::to_string(dim_));
  }
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(id.size()));
  out_.write(id.data(), static_cast<std::streamsize>(id.size()));
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(m.rows()));
  for (float v : m.data()) put<float>(out_, v);
  ++count_;
}

void EmbeddingWriter::finish() {
  if (finished_) return;
  finished_ = true;
  out_.seekp(12);
  put<std::uint64_t>(out_, count_);
  out_.flush();
  if (!out_) throw Error(ErrorCode::kIoFailure, "write failed: " + path_);
  out_.close();
}

void write_embeddings(
    const std::string& path, std::uint32_t dim,
    const std::vector<std::pair<std::string, TokenEmbeddings>>& entries) {
  EmbeddingWriter w(path, dim);
  for (const auto& [id, m] : entries) w.add(id, m);
  w.finish();
}

EmbeddingFile::EmbeddingFile(std::string path, std::ifstream in,
                             EmbeddingFileHeader header,
                             std::uint64_t file_size)
    : path_(std::move(path)),
      header_(header),
      file_size_(file_size),
      in_(std::move(in)) {}

std::unique_ptr<EmbeddingFile> EmbeddingFile::open(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path);
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot stat " + path);

  unsigned char raw[kEmbeddingHeaderBytes];
  in.read(reinterpret_cast<char*>(raw), sizeof(raw));
  if (in.gcount() < 4 || std::memcmp(raw, kEmbeddingMagic, 4) != 0) {
    throw Error(ErrorCode::kFormatMismatch, path + ": bad magic, expected EMB1");
  }
  if (static_cast<std::uint64_t>(in.gcount()) < kEmbeddingHeaderBytes) {
    truncated(path, static_cast<std::uint64_t>(in.gcount()));
  }
  EmbeddingFileHeader h;
  h.version = get<std::uint32_t>(raw + 4);
  h.dim = get<std::uint32_t>(raw + 8);
  h.entry_count = get<std::uint64_t>(raw + 12);
  if (h.version != kEmbeddingVersion) {
    throw Error(ErrorCode::kFormatMismatch,
                path + ": unsupported version " + std::to_string(h.version));
  }
  if (h.dim == 0) {
    throw Error(ErrorCode::kFormatMismatch, path + ": dim must be >= 1");
  }
  return std::unique_ptr<EmbeddingFile>(
      new EmbeddingFile(path, std::move(in), h, size));
}

void EmbeddingFile::build_index() const {
  std::uint64_t offset = kEmbeddingHeaderBytes;
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(offset));
  index_.reserve(header_.entry_count);
  std::string id;
  for (std::uint64_t e = 0; e < header_.entry_count; ++e) {
    unsigned char word[4];
    if (offset + 4 > file_size_) truncated(path_, offset);
    in_.read(reinterpret_cast<char*>(word), 4);
    const auto id_len = get<std::uint32_t>(word);
    offset += 4;
    if (offset + id_len + 4 > file_size_) truncated(path_, offset);
    id.resize(id_len);
    in_.read(id.data(), id_len);
    in_.read(reinterpret_cast<char*>(word), 4);
    const auto rows = get<std::uint32_t>(word);
    offset += id_len + 4;
    const std::uint64_t payload =
        static_cast<std::uint64_t>(rows) * header_.dim * sizeof(float);
    if (offset + payload > file_size_) truncated(path_, offset);
    if (!index_.emplace(id, Slot{offset, rows}).second) {
      throw Error(ErrorCode::kFormatMismatch,
                  path_ + ": duplicate id '" + id + "'");
    }
    order_.push_back(id);
    offset += payload;
    in_.seekg(static_cast<std::streamoff>(offset));
  }
  if (offset != file_size_) {
    throw Error(ErrorCode::kFormatMismatch,
                path_ + ": " + std::to_string(file_size_ - offset) +
                    " trailing bytes after declared entries");
  }
  indexed_ = true;
}

std::optional<TokenEmbeddings> EmbeddingFile::find(std::string_view id) const {
  std::lock_guard lock(mu_);
  if (!indexed_) build_index();
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  const Slot slot = it->second;
  const std::size_t n = static_cast<std::size_t>(slot.rows) * header_.dim;
  std::vector<float> data(n);
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(slot.payload_offset));
  in_.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(in_.gcount()) != n * sizeof(float)) {
    truncated(path_, slot.payload_offset);
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : data) v = byteswap_if_big(v);
  }
  return TokenEmbeddings(slot.rows, header_.dim, std::move(data));
}

std::vector<std::string> EmbeddingFile::ids() const {
  std::lock_guard lock(mu_);
  if (!indexed_) build_index();
  return order_;
}

std::unordered_map<std::string, TokenEmbeddings> read_embeddings(
    const std::string& path) {
  auto file = EmbeddingFile::open(path);
  std::unordered_map<std::string, TokenEmbeddings> out;
  for (const auto& id : file->ids()) out.emplace(id, *file->find(id));
  return out;
}

}  // namespace capalign
