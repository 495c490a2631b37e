#include "cforge/byte_source.hpp"

#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <istream>
#include <unistd.h>

#include "cforge/error.hpp"

namespace cforge {

FileSource::FileSource(const std::filesystem::path& path)
    : file_(std::fopen(path.c_str(), "rb")), name_(path.string()) {
  if (file_ == nullptr) {
    throw IoError("cannot open " + name_ + ": " + std::strerror(errno));
  }
  std::setvbuf(file_, nullptr, _IONBF, 0);
}

FileSource::~FileSource() {
  if (file_ != nullptr) std::fclose(file_);
}

std::size_t FileSource::read(std::span<char> buffer) {
  const std::size_t n = std::fread(buffer.data(), 1, buffer.size(), file_);
  if (n == 0 && std::ferror(file_)) throw IoError("read error on " + name_);
  return n;
}

GzipSource::GzipSource(const std::filesystem::path& path)
    : handle_(gzopen(path.c_str(), "rb")), name_(path.string()) {
  if (handle_ == nullptr) throw IoError("cannot open " + name_);
  gzbuffer(static_cast<gzFile>(handle_), 1 << 18);
}

GzipSource::GzipSource(void* handle, std::string name)
    : handle_(handle), name_(std::move(name)) {}

std::unique_ptr<GzipSource> GzipSource::from_stdin() {
  gzFile handle = gzdopen(dup(STDIN_FILENO), "rb");
  if (handle == nullptr) throw IoError("cannot open stdin");
  return std::unique_ptr<GzipSource>(new GzipSource(handle, "<stdin>"));
}

GzipSource::~GzipSource() {
  if (handle_ != nullptr) gzclose(static_cast<gzFile>(handle_));
}

std::size_t GzipSource::read(std::span<char> buffer) {
  const int n = gzread(static_cast<gzFile>(handle_), buffer.data(),
                       static_cast<unsigned>(buffer.size()));
  if (n < 0) {
    int code = 0;
    const char* msg = gzerror(static_cast<gzFile>(handle_), &code);
    throw IoError("read error on " + name_ + ": " + (msg ? msg : "zlib error"));
  }
  return static_cast<std::size_t>(n);
}

std::size_t StreamSource::read(std::span<char> buffer) {
  in_.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  const auto n = static_cast<std::size_t>(in_.gcount());
  if (n == 0 && in_.bad()) throw IoError("stream read error");
  return n;
}

std::size_t StringSource::read(std::span<char> buffer) {
  const std::size_t n = std::min(buffer.size(), data_.size() - pos_);
  std::memcpy(buffer.data(), data_.data() + pos_, n);
  pos_ += n;
  return n;
}

bool is_gzip_file(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) return false;
  unsigned char magic[2] = {0, 0};
  const std::size_t n = std::fread(magic, 1, 2, f);
  std::fclose(f);
  return n == 2 && magic[0] == 0x1F && magic[1] == 0x8B;
}

std::unique_ptr<ByteSource> open_input(const std::filesystem::path& path) {
  if (path == "-") return GzipSource::from_stdin();
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  if (is_gzip_file(path)) return std::make_unique<GzipSource>(path);
  return std::make_unique<FileSource>(path);
}

LineReader::LineReader(ByteSource& source, std::size_t buffer_size)
    : source_(source), chunk_(buffer_size == 0 ? 1 : buffer_size) {
  buffer_.resize(chunk_);
}

bool LineReader::refill() {
  if (eof_) return false;
  // Compact the unread tail to the front, then grow only if a single record
  // fills the whole buffer.
  if (begin_ > 0) {
    std::memmove(buffer_.data(), buffer_.data() + begin_, end_ - begin_);
    end_ -= begin_;
    begin_ = 0;
  }
  if (end_ == buffer_.size()) buffer_.resize(buffer_.size() + chunk_);
  const std::size_t n = source_.read(std::span<char>(buffer_.data() + end_, buffer_.size() - end_));
  if (n == 0) {
    eof_ = true;
    return false;
  }
  end_ += n;
  return true;
}

bool LineReader::next(std::string_view& line) {
  std::size_t scan_from = begin_;
  for (;;) {
    const void* hit = std::memchr(buffer_.data() + scan_from, '\n', end_ - scan_from);
    if (hit != nullptr) {
      const auto nl = static_cast<std::size_t>(static_cast<const char*>(hit) - buffer_.data());
      std::size_t stop = nl;
      if (stop > begin_ && buffer_[stop - 1] == '\r') --stop;
      line = std::string_view(buffer_.data() + begin_, stop - begin_);
      consumed_ += nl + 1 - begin_;
      begin_ = nl + 1;
      return true;
    }
    const std::size_t scanned = end_ - begin_;
    if (!refill()) break;
    scan_from = begin_ + scanned;
  }
  if (begin_ == end_) return false;
  std::size_t stop = end_;
  if (buffer_[stop - 1] == '\r') --stop;
  line = std::string_view(buffer_.data() + begin_, stop - begin_);
  consumed_ += end_ - begin_;
  begin_ = end_;
  return true;
}

}  // namespace cforge
