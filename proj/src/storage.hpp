#pragma once

#include <functional>
#include <optional>
#include <string>

#include "common.hpp"

namespace osmr {

// On-disk layout: 64-byte header, raw window bytes at file offset
// 64 + displacement, meta blob (task bitmap etc.) after the window bytes.
// A file is only valid when header.state == kClean; the sync protocol
// below guarantees a kill at any instant leaves either the previous
// clean image or a detectably unfinished one.
struct StorageHeader {
  static constexpr uint64_t kMagic = 0x314e49575253534full;  // "OSSRWIN1"
  static constexpr uint32_t kVersion = 1;
  static constexpr uint32_t kClean = 1;
  static constexpr uint32_t kSyncing = 2;
  static constexpr size_t kSize = 64;

  uint64_t magic = kMagic;
  uint32_t version = kVersion;
  uint32_t window_id = 0;
  uint64_t size = 0;           // synced displacement-space bytes
  uint64_t bitmap_offset = 0;  // file offset of the meta blob, 0 if none
  uint32_t state = kClean;
  uint64_t sync_epoch = 0;
  uint64_t meta_len = 0;

  void encode(uint8_t out[kSize]) const;
  static std::optional<StorageHeader> decode(const uint8_t in[kSize]);
};

struct LoadedImage {
  uint32_t window_id = 0;
  uint64_t sync_epoch = 0;
  Bytes bytes;
  Bytes meta;
};

using RangeReadFn = std::function<void(uint64_t off, uint64_t len, uint8_t* dst)>;

class StorageFile {
public:
  StorageFile() = default;
  ~StorageFile();
  StorageFile(const StorageFile&) = delete;
  StorageFile& operator=(const StorageFile&) = delete;
  StorageFile(StorageFile&& o) noexcept { *this = std::move(o); }
  StorageFile& operator=(StorageFile&& o) noexcept;

  // Creates or truncates; leaves a clean epoch-0 header on disk so a kill
  // before the first sync recovers to the initial (zero-filled) state.
  static StorageFile create(const std::string& path, uint32_t window_id, uint64_t size);

  // Reopens a clean image for continued syncing after recovery.
  static StorageFile reopen(const std::string& path, const StorageHeader& hdr);

  // Returns nullopt for missing, truncated, mid-sync, or foreign files.
  static std::optional<LoadedImage> load(const std::string& path);

  // Flushes the given ranges plus the meta blob, then commits the header.
  void sync(const std::vector<std::pair<uint64_t, uint64_t>>& ranges, uint64_t size,
            const RangeReadFn& read, ByteView meta);

  uint64_t epoch() const { return epoch_; }

private:
  void write_header(uint32_t state, uint64_t size, uint64_t meta_len);

  int fd_ = -1;
  std::string path_;
  uint32_t window_id_ = 0;
  uint64_t epoch_ = 0;
};

}  // namespace osmr
