"""
Running the pipeline from Python or the shell
=============================================

The same stages are available as ``ablscar <stage>`` on the command line
(``ablscar all`` runs everything).  Each stage writes CSV/JSON files into
its own subdirectory and records them, with SHA-256 checksums, in
``manifest.json``.  Stages whose inputs have not changed are served from
the cache.
"""

# %%
import json
import tempfile
from pathlib import Path

from ablscar import cli

out = Path(tempfile.mkdtemp()) / "run"
cfg = cli.config_from_dict({"orbit": {"poincare_bounces": 10}})
print(cli.dump_config(cfg))

# %% orbit, then stability (which depends on it)
cli.run_command("orbit", cfg, out)
man = cli.run_command("stability", cfg, out)
print(json.dumps(man["stages"]["stability"]["results"], indent=1)[:600])

# %% A second call is served from the cache
man = cli.run_command("stability", cfg, out)
print("cached:", man["stages"]["stability"]["cached"])
print(sorted(man["files"]))

# %% Asking for a stage before its inputs exist is an error naming the missing stage
try:
    cli.run_command("compare", cfg, out)
except cli.DependencyError as e:
    print(e)
