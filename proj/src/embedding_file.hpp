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

// "EMB1" embedding container.
//
// Layout, all integers little-endian:
//
//   magic        4 bytes  "EMB1"
//   version      u32      1
//   dim          u32      >= 1
//   entry_count  u64
//   entry_count times:
//     id_len     u32
//     id         id_len bytes (opaque, usually UTF-8)
//     rows       u32
//     payload    rows * dim IEEE-754 binary32
//
// Readers index the file on first lookup and then seek directly to entries.

#ifndef CAPALIGN_EMBEDDING_FILE_HPP_
#define CAPALIGN_EMBEDDING_FILE_HPP_

#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "data_model.hpp"

namespace capalign {

inline constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::uint64_t kEmbeddingHeaderBytes = 20;

struct EmbeddingFileHeader {
  std::uint32_t version = kEmbeddingVersion;
  std::uint32_t dim = 0;
  std::uint64_t entry_count = 0;
};

// Lookup by id; implemented by in-memory maps and by indexed files.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual std::optional<TokenEmbeddings> find(std::string_view id) const = 0;
  virtual std::size_t dim() const = 0;
};

class InMemoryEmbeddings : public EmbeddingSource {
 public:
  explicit InMemoryEmbeddings(std::size_t dim) : dim_(dim) {}

  void insert(std::string id, TokenEmbeddings m);
  std::optional<TokenEmbeddings> find(std::string_view id) const override;
  std::size_t dim() const override { return dim_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, TokenEmbeddings> entries_;
};

// Streams entries to disk. The entry count in the header is patched on
// finish(), so the number of entries need not be known up front.
class EmbeddingWriter {
 public:
  EmbeddingWriter(const std::string& path, std::uint32_t dim);
  ~EmbeddingWriter();

  EmbeddingWriter(const EmbeddingWriter&) = delete;
  EmbeddingWriter& operator=(const EmbeddingWriter&) = delete;

  void add(std::string_view id, const TokenEmbeddings& m);
  void finish();

 private:
  std::ofstream out_;
  std::string path_;
  std::uint32_t dim_;
  std::uint64_t count_ = 0;
  bool finished_ = false;
};

void write_embeddings(
    const std::string& path, std::uint32_t dim,
    const std::vector<std::pair<std::string, TokenEmbeddings>>& entries);

class EmbeddingFile : public EmbeddingSource {
 public:
  // Opens the file and validates the header. Throws kIoFailure or
  // kFormatMismatch.
  static std::unique_ptr<EmbeddingFile> open(const std::string& path);

  const EmbeddingFileHeader& header() const { return header_; }
  std::size_t dim() const override { return header_.dim; }

  // Builds the id index on first use. Throws kTruncated or kFormatMismatch if
  // the body disagrees with the header.
  std::optional<TokenEmbeddings> find(std::string_view id) const override;
  std::vector<std::string> ids() const;

 private:
  struct Slot {
    std::uint64_t payload_offset;
    std::uint32_t rows;
  };

  EmbeddingFile(std::string path, std::ifstream in, EmbeddingFileHeader header,
                std::uint64_t file_size);
  void build_index() const;

  std::string path_;
  EmbeddingFileHeader header_;
  std::uint64_t file_size_;
  mutable std::ifstream in_;
  mutable std::mutex mu_;
  mutable bool indexed_ = false;
  mutable std::vector<std::string> order_;
  mutable std::unordered_map<std::string, Slot> index_;
};

// Reads every entry. Convenience for small files and tests.
std::unordered_map<std::string, TokenEmbeddings> read_embeddings(
    const std::string& path);

}  // namespace capalign

#endif  // CAPALIGN_EMBEDDING_FILE_HPP_
