// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dj {

enum class ErrorCode {
    kTokenMismatch,
    kSchemaViolation,
    kSourceNotFound,
    kEmptySource,
    kTargetUnwritable,
    kRecipeMismatch,
    kUnknownOp,
    kParamValidation,
    kNonBatchableChild,
    kMissingGroupKey,
    kScriptNonZeroExit,
    kUnreadableMedia,
    kMissingStat,
    kStatKeyConflict,
    kNonPositiveSpeed,
    kCorruptSample,
    kRecipeParse,
    kPlanInvalid,
    kAborted,
    kIo,
    kInternal,
};

/// Stable machine-greppable name, e.g. "TokenMismatch".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
            : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// Errors that describe a bad sample or unreadable media are handled per
    /// batch by the fault policy; everything else aborts the run.
    bool is_sample_level() const noexcept {
        return code_ == ErrorCode::kCorruptSample || code_ == ErrorCode::kUnreadableMedia ||
               code_ == ErrorCode::kMissingGroupKey || code_ == ErrorCode::kMissingStat ||
               code_ == ErrorCode::kTokenMismatch;
    }

private:
    ErrorCode code_;
};

} // namespace dj
