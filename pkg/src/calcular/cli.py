"""Command line front end: ``calcular --job FILE [--out FILE] [--quiet]``.

Exit codes: 0 success, 1 job/schema error, 2 math-domain error,
3 solver error, 4 internal error.
"""

import argparse
import os
import sys
import tempfile

from .errors import MathDomainError, SchemaError, SolverError
from .jobs import dumps, error_report, parse_job, run_job

EXIT_SCHEMA, EXIT_DOMAIN, EXIT_SOLVER, EXIT_INTERNAL = 1, 2, 3, 4


def exit_code(exc):
    if isinstance(exc, SchemaError):
        return EXIT_SCHEMA
    if isinstance(exc, MathDomainError):
        return EXIT_DOMAIN
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, ValueError):
        # plain ValueErrors come from input checks (boundary points, bad literals)
        return EXIT_DOMAIN
    return EXIT_INTERNAL


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".calcular-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None):
    ap = argparse.ArgumentParser(prog="calcular", description="Run a calcular job file.")
    ap.add_argument("command", nargs="?", help="optional; must match the job's command if given")
    ap.add_argument("--job", required=True, help="path to the JSON job document")
    ap.add_argument("--out", help="write the report here (atomically) instead of stdout")
    ap.add_argument("--quiet", action="store_true", help="no summary line on stderr")
    args = ap.parse_args(argv)

    config, code = None, 0
    try:
        with open(args.job, encoding="utf-8") as fh:
            text = fh.read()
        job = parse_job(text)
        config = job.config
        if args.command and args.command != job.command:
            raise SchemaError(f"command line says {args.command!r}, job says {job.command!r}", "/command")
        doc = run_job(job).document()
    except OSError as exc:
        doc, code = {"report": error_report(exc, None, EXIT_SCHEMA), "metadata": {}}, EXIT_SCHEMA
    except Exception as exc:  # mapped onto exit codes; the report carries the details
        code = exit_code(exc)
        doc = {"report": error_report(exc, config, code), "metadata": {}}

    text = dumps(doc)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    if not args.quiet:
        rep = doc["report"]
        if code:
            print(f"calcular: {rep['error']['type']}: {rep['error']['message']}", file=sys.stderr)
        else:
            print(f"calcular {rep['command']}: ok", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
