/* Copyright 2026 The focusrl Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "focusrl/error.hpp"

namespace focusrl {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidToken: return "InvalidToken";
    case ErrorCode::kInvalidBox: return "InvalidBox";
    case ErrorCode::kNoFeasibleBox: return "NoFeasibleBox";
    case ErrorCode::kPlacementFailure: return "PlacementFailure";
    case ErrorCode::kNoUnambiguousQuery: return "NoUnambiguousQuery";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kWrongReference: return "WrongReference";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kConfigParse: return "ConfigParse";
    case ErrorCode::kMissingInput: return "MissingInput";
    case ErrorCode::kSchema: return "Schema";
    case ErrorCode::kHashMismatch: return "HashMismatch";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigParse: return 2;
    case ErrorCode::kInvalidConfig: return 3;
    case ErrorCode::kMissingInput: return 4;
    case ErrorCode::kSchema: return 5;
    case ErrorCode::kHashMismatch: return 6;
    case ErrorCode::kIo: return 7;
    case ErrorCode::kEmptyDataset: return 10;
    case ErrorCode::kEmptyPool: return 11;
    case ErrorCode::kEmptyBatch: return 12;
    case ErrorCode::kWrongReference: return 13;
    case ErrorCode::kNoFeasibleBox: return 14;
    case ErrorCode::kPlacementFailure: return 15;
    case ErrorCode::kNoUnambiguousQuery: return 16;
    case ErrorCode::kInvalidToken: return 17;
    case ErrorCode::kInvalidBox: return 18;
    case ErrorCode::kLengthMismatch: return 19;
    case ErrorCode::kMissingGroundTruth: return 20;
  }
  return 1;
}

}  // namespace focusrl
