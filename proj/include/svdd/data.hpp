// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/data/codec.hpp"
#include "svdd/data/manifest.hpp"
#include "svdd/data/synth.hpp"
