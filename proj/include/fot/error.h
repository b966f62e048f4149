/*
 * Copyright 2026 The FedOrtho Authors
 *
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

#ifndef FOT_ERROR_H_
#define FOT_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace fot {

enum class ErrorCode {
  kInvalidInput,
  kUnknownTask,
  kEmptyDataset,
  kNoData,
  kProtocolError,
  kParseError,
  kConfigError,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
      return "InvalidInput";
    case ErrorCode::kUnknownTask:
      return "UnknownTask";
    case ErrorCode::kEmptyDataset:
      return "EmptyDataset";
    case ErrorCode::kNoData:
      return "NoData";
    case ErrorCode::kProtocolError:
      return "ProtocolError";
    case ErrorCode::kParseError:
      return "ParseError";
    case ErrorCode::kConfigError:
      return "ConfigError";
    case ErrorCode::kIoError:
      return "IoError";
  }
  return "Unknown";
}

}  // namespace fot

#endif  // FOT_ERROR_H_
