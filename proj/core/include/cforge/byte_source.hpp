#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace cforge {

/// Pull-based byte stream. `read` returns 0 only at end of input and throws
/// IoError on failure.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::size_t read(std::span<char> buffer) = 0;
};

class FileSource final : public ByteSource {
 public:
  explicit FileSource(const std::filesystem::path& path);
  ~FileSource() override;
  FileSource(const FileSource&) = delete;
  FileSource& operator=(const FileSource&) = delete;

  std::size_t read(std::span<char> buffer) override;

 private:
  std::FILE* file_;
  std::string name_;
};

/// gzip-compressed file, or stdin (zlib reads uncompressed input transparently).
class GzipSource final : public ByteSource {
 public:
  explicit GzipSource(const std::filesystem::path& path);
  static std::unique_ptr<GzipSource> from_stdin();
  ~GzipSource() override;
  GzipSource(const GzipSource&) = delete;
  GzipSource& operator=(const GzipSource&) = delete;

  std::size_t read(std::span<char> buffer) override;

 private:
  GzipSource(void* handle, std::string name);
  void* handle_;
  std::string name_;
};

class StreamSource final : public ByteSource {
 public:
  explicit StreamSource(std::istream& in) : in_(in) {}
  std::size_t read(std::span<char> buffer) override;

 private:
  std::istream& in_;
};

class StringSource final : public ByteSource {
 public:
  explicit StringSource(std::string data) : data_(std::move(data)) {}
  std::size_t read(std::span<char> buffer) override;

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

bool is_gzip_file(const std::filesystem::path& path);

/// Opens `path` for reading ("-" is stdin). Compression is detected from the
/// gzip magic bytes, not the file extension.
std::unique_ptr<ByteSource> open_input(const std::filesystem::path& path);

/// Splits a ByteSource into LF-delimited records. A trailing CR is removed
/// from each record and a final unterminated record is still returned.
/// Memory stays bounded by the longest record plus the read buffer.
class LineReader {
 public:
  explicit LineReader(ByteSource& source, std::size_t buffer_size = 1 << 20);

  /// The view stays valid until the next call.
  bool next(std::string_view& line);

  /// Bytes consumed so far, line terminators included.
  std::uint64_t bytes_consumed() const noexcept { return consumed_; }

 private:
  bool refill();

  ByteSource& source_;
  std::string buffer_;
  std::size_t begin_ = 0;
  std::size_t end_ = 0;
  std::size_t chunk_;
  bool eof_ = false;
  std::uint64_t consumed_ = 0;
};

}  // namespace cforge
