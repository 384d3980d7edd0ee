# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""Simulation of learners, tasks, and synthetic case-control datasets."""
