# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Site directories for configuration files and crash logs.

Three sites are searched for configuration: system, user and local (the
working directory, or CASECONTROL_SITE if defined). Run artifacts never live
here; they go under the run output directory.
"""


# standard libs
import os
import sys
import platform

# external libs
from cmdkit.config import Namespace
from cmdkit.app import exit_status
from cmdkit.ansi import bold, magenta

# public interface
__all__ = ['cwd', 'home', 'site', 'path', 'default_path']


def _critical(message: str) -> None:
    print(f'{bold(magenta("CRITICAL"))} [{__name__}] {message}', file=sys.stderr)
    sys.exit(exit_status.bad_config)


def _layout(log_dir: str, config_file: str) -> dict:
    return {'log': log_dir, 'config': config_file}


cwd = os.getcwd()
home = os.path.expanduser('~')
local_site = os.getenv('CASECONTROL_SITE', os.path.join(cwd, '.casecontrol'))
if 'CASECONTROL_SITE' in os.environ and not os.path.isdir(local_site):
    _critical(f'Directory does not exist (CASECONTROL_SITE={local_site})')

if os.name != 'posix':
    _critical(f'Platform unsupported ({platform.system()})')

is_admin = os.getuid() == 0
if platform.system() == 'Darwin':
    site = Namespace(system='/', user=home, local=local_site)
    path = Namespace({
        'system': _layout(os.path.join('/Library', 'Logs', 'CaseControl'),
                          os.path.join('/Library', 'Preferences', 'CaseControl', 'config.toml')),
        'user': _layout(os.path.join(home, 'Library', 'Logs', 'CaseControl'),
                        os.path.join(home, 'Library', 'Preferences', 'CaseControl', 'config.toml')),
    })
else:
    site = Namespace(system='/', user=os.path.join(home, '.casecontrol'), local=local_site)
    path = Namespace({
        'system': _layout('/var/log/casecontrol', '/etc/casecontrol.toml'),
        'user': _layout(os.path.join(site.user, 'log'), os.path.join(site.user, 'config.toml')),
    })
path['local'] = Namespace(_layout(os.path.join(local_site, 'log'), os.path.join(local_site, 'config.toml')))

if 'CASECONTROL_SITE' in os.environ:
    default_path = path.local
elif is_admin:
    default_path = path.system
else:
    default_path = path.user

try:
    os.makedirs(default_path.log, exist_ok=True)
except PermissionError:
    pass
