def f(text, ch):
    i = 0
    while i < len(text):
        if text[i] == ch:
            return i
        i += 1
    return -1
# oracle-call: f('hello', 'l')
# oracle-call: f('hello', 'z')
