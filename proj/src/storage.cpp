#include "storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace osmr {

void StorageHeader::encode(uint8_t out[kSize]) const {
  std::memset(out, 0, kSize);
  store_u64le(out + 0, magic);
  store_u32le(out + 8, version);
  store_u32le(out + 12, window_id);
  store_u64le(out + 16, size);
  store_u64le(out + 24, bitmap_offset);
  store_u32le(out + 32, state);
  store_u64le(out + 40, sync_epoch);
  store_u64le(out + 48, meta_len);
}

std::optional<StorageHeader> StorageHeader::decode(const uint8_t in[kSize]) {
  StorageHeader h;
  h.magic = load_u64le(in + 0);
  h.version = load_u32le(in + 8);
  h.window_id = load_u32le(in + 12);
  h.size = load_u64le(in + 16);
  h.bitmap_offset = load_u64le(in + 24);
  h.state = load_u32le(in + 32);
  h.sync_epoch = load_u64le(in + 40);
  h.meta_len = load_u64le(in + 48);
  if (h.magic != kMagic || h.version != kVersion) return std::nullopt;
  return h;
}

namespace {

void pwrite_all(int fd, const void* buf, size_t len, uint64_t off, const std::string& path) {
  const uint8_t* p = static_cast<const uint8_t*>(buf);
  while (len > 0) {
    ssize_t n = ::pwrite(fd, p, len, static_cast<off_t>(off));
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Err::io, "pwrite " + path + ": " + std::strerror(errno));
    }
    p += n;
    off += static_cast<uint64_t>(n);
    len -= static_cast<size_t>(n);
  }
}

bool pread_all(int fd, void* buf, size_t len, uint64_t off) {
  uint8_t* p = static_cast<uint8_t*>(buf);
  while (len > 0) {
    ssize_t n = ::pread(fd, p, len, static_cast<off_t>(off));
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    if (n == 0) return false;  // truncated
    p += n;
    off += static_cast<uint64_t>(n);
    len -= static_cast<size_t>(n);
  }
  return true;
}

}  // namespace

StorageFile::~StorageFile() {
  if (fd_ >= 0) ::close(fd_);
}

StorageFile& StorageFile::operator=(StorageFile&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    o.fd_ = -1;
    path_ = std::move(o.path_);
    window_id_ = o.window_id_;
    epoch_ = o.epoch_;
  }
  return *this;
}

void StorageFile::write_header(uint32_t state, uint64_t size, uint64_t meta_len) {
  StorageHeader h;
  h.window_id = window_id_;
  h.size = size;
  h.bitmap_offset = meta_len ? StorageHeader::kSize + size : 0;
  h.state = state;
  h.sync_epoch = epoch_;
  h.meta_len = meta_len;
  uint8_t buf[StorageHeader::kSize];
  h.encode(buf);
  pwrite_all(fd_, buf, sizeof(buf), 0, path_);
  if (::fdatasync(fd_) != 0) fail(Err::io, "fdatasync " + path_);
}

StorageFile StorageFile::create(const std::string& path, uint32_t window_id, uint64_t size) {
  StorageFile f;
  f.fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
  if (f.fd_ < 0) fail(Err::io, "open " + path + ": " + std::strerror(errno));
  f.path_ = path;
  f.window_id_ = window_id;
  // Sparse body: unsynced displacement space reads back as zeros, matching
  // the zero-fill guarantee of freshly attached regions.
  if (::ftruncate(f.fd_, static_cast<off_t>(StorageHeader::kSize + size)) != 0)
    fail(Err::io, "ftruncate " + path);
  f.write_header(StorageHeader::kClean, size, 0);
  return f;
}

StorageFile StorageFile::reopen(const std::string& path, const StorageHeader& hdr) {
  StorageFile f;
  f.fd_ = ::open(path.c_str(), O_RDWR, 0644);
  if (f.fd_ < 0) fail(Err::io, "open " + path + ": " + std::strerror(errno));
  f.path_ = path;
  f.window_id_ = hdr.window_id;
  f.epoch_ = hdr.sync_epoch;
  return f;
}

std::optional<LoadedImage> StorageFile::load(const std::string& path) {
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) return std::nullopt;
  uint8_t buf[StorageHeader::kSize];
  if (!pread_all(fd, buf, sizeof(buf), 0)) {
    ::close(fd);
    return std::nullopt;
  }
  auto hdr = StorageHeader::decode(buf);
  if (!hdr || hdr->state != StorageHeader::kClean) {
    ::close(fd);
    return std::nullopt;
  }
  LoadedImage img;
  img.window_id = hdr->window_id;
  img.sync_epoch = hdr->sync_epoch;
  img.bytes.resize(hdr->size);
  if (hdr->size && !pread_all(fd, img.bytes.data(), img.bytes.size(), StorageHeader::kSize)) {
    ::close(fd);
    return std::nullopt;
  }
  if (hdr->meta_len) {
    img.meta.resize(hdr->meta_len);
    if (!pread_all(fd, img.meta.data(), img.meta.size(), hdr->bitmap_offset)) {
      ::close(fd);
      return std::nullopt;
    }
  }
  ::close(fd);
  return img;
}

void StorageFile::sync(const std::vector<std::pair<uint64_t, uint64_t>>& ranges, uint64_t size,
                       const RangeReadFn& read, ByteView meta) {
  // Commit protocol: mark unstable, write data, mark clean. Recovery treats
  // anything not clean as absent, so a kill mid-sync invalidates the image
  // and the next run starts cold rather than trusting torn data.
  write_header(StorageHeader::kSyncing, size, meta.size());
  // Keep the file length in lockstep with the claimed image size. The window
  // grows over time and clean-but-never-written space must read back as
  // zeros, which a sparse extension provides.
  if (::ftruncate(fd_, static_cast<off_t>(StorageHeader::kSize + size + meta.size())) != 0)
    fail(Err::io, "ftruncate " + path_);
  Bytes scratch;
  for (const auto& [off, len] : ranges) {
    scratch.resize(len);
    read(off, len, scratch.data());
    pwrite_all(fd_, scratch.data(), len, StorageHeader::kSize + off, path_);
  }
  if (!meta.empty())
    pwrite_all(fd_, meta.data(), meta.size(), StorageHeader::kSize + size, path_);
  if (::fdatasync(fd_) != 0) fail(Err::io, "fdatasync " + path_);
  epoch_++;
  write_header(StorageHeader::kClean, size, meta.size());
}

}  // namespace osmr
