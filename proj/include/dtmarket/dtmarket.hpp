// Copyright 2026 The dtmarket Authors
//
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

#include "dtmarket/auction.hpp"
#include "dtmarket/domain.hpp"
#include "dtmarket/engine.hpp"
#include "dtmarket/io.hpp"
#include "dtmarket/mechanism.hpp"
#include "dtmarket/network.hpp"
#include "dtmarket/scoring.hpp"
#include "dtmarket/simvalue.hpp"
#include "dtmarket/util.hpp"
#include "dtmarket/verify.hpp"
