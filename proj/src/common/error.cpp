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

#include "dj/common/error.hpp"

namespace dj {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::kTokenMismatch: return "TokenMismatch";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kSourceNotFound: return "SourceNotFound";
    case ErrorCode::kEmptySource: return "EmptySource";
    case ErrorCode::kTargetUnwritable: return "TargetUnwritable";
    case ErrorCode::kRecipeMismatch: return "RecipeMismatch";
    case ErrorCode::kUnknownOp: return "UnknownOp";
    case ErrorCode::kParamValidation: return "ParamValidation";
    case ErrorCode::kNonBatchableChild: return "NonBatchableChild";
    case ErrorCode::kMissingGroupKey: return "MissingGroupKey";
    case ErrorCode::kScriptNonZeroExit: return "ScriptNonZeroExit";
    case ErrorCode::kUnreadableMedia: return "UnreadableMedia";
    case ErrorCode::kMissingStat: return "MissingStat";
    case ErrorCode::kStatKeyConflict: return "StatKeyConflict";
    case ErrorCode::kNonPositiveSpeed: return "NonPositiveSpeed";
    case ErrorCode::kCorruptSample: return "CorruptSample";
    case ErrorCode::kRecipeParse: return "RecipeParse";
    case ErrorCode::kPlanInvalid: return "PlanInvalid";
    case ErrorCode::kAborted: return "Aborted";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kInternal: return "Internal";
    }
    return "Unknown";
}

} // namespace dj
