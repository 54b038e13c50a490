import io
import json
import sys

FILENAME = "<program>"
source = sys.stdin.read()
calls = sys.argv[1:]
events = []
activations = [0]


def on_call(frame, event, arg):
    code = frame.f_code
    if code.co_filename != FILENAME:
        return None
    if code.co_name.startswith("<") and code.co_name != "<module>":
        return None
    activations[0] += 1
    activation = activations[0]

    def on_line(frame, event, arg):
        if event == "line":
            events.append([activation, code.co_name, frame.f_lineno])
        return on_line

    return on_line


error = None
exited = False
real_stdout = sys.stdout
sys.stdout = io.StringIO()
namespace = {"__name__": "__main__"}
try:
    compiled = compile(source, FILENAME, "exec")
    sys.settrace(on_call)
    try:
        exec(compiled, namespace)
        for call in calls:
            exec(call, namespace)
    finally:
        sys.settrace(None)
except SystemExit as exc:
    exited = True
    if exc.code not in (None, 0):
        error = "SystemExit: %s" % (exc.code,)
except BaseException as exc:
    error = "%s: %s" % (type(exc).__name__, exc)
sys.stdout = real_stdout
sys.stdout.write(json.dumps({"events": events, "error": error, "exited": exited}))
