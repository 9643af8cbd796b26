// Copyright 2026  Verid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef VERID_COMMON_HPP_
#define VERID_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace verid {

inline constexpr const char* kVersion = "0.1.0";

// Base class for all toolkit errors. Subcommands map these to exit code 2;
// anything else escaping to main is a bug.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define VERID_DEFINE_ERROR(name)                                   \
  class name : public ::verid::Error {                             \
   public:                                                         \
    explicit name(const std::string& msg)                          \
        : ::verid::Error(std::string(#name) + ": " + msg) {}       \
  }

// audio_io
VERID_DEFINE_ERROR(MalformedWav);
VERID_DEFINE_ERROR(UnsupportedFormat);
VERID_DEFINE_ERROR(EmptyAudio);
VERID_DEFINE_ERROR(OffsetBeyondClip);
VERID_DEFINE_ERROR(ParseError);
VERID_DEFINE_ERROR(DuplicatePath);

// dsp_frontend
VERID_DEFINE_ERROR(WrongLength);
VERID_DEFINE_ERROR(TooShort);

// nn_core
VERID_DEFINE_ERROR(ShapeMismatch);
VERID_DEFINE_ERROR(MissingCache);
VERID_DEFINE_ERROR(BatchTooSmall);
VERID_DEFINE_ERROR(LabelOutOfRange);
VERID_DEFINE_ERROR(InvalidLabel);
VERID_DEFINE_ERROR(SpecMismatch);

// training
VERID_DEFINE_ERROR(TooFewSpeakers);
VERID_DEFINE_ERROR(BadConfig);

// verification
VERID_DEFINE_ERROR(NoEmbeddings);
VERID_DEFINE_ERROR(ZeroVector);
VERID_DEFINE_ERROR(DimMismatch);
VERID_DEFINE_ERROR(EmptySide);
VERID_DEFINE_ERROR(Infeasible);

// gmm_ubm
VERID_DEFINE_ERROR(TooFewFrames);

// generic I/O
VERID_DEFINE_ERROR(IoError);

#undef VERID_DEFINE_ERROR

// FNV-1a over a byte buffer; used for the input digests in run summaries.
inline std::uint64_t Fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace verid

#endif  // VERID_COMMON_HPP_
