def f(text):
    new_text = ''
    for ch in text.lower().strip():
        if ch.isnumeric() or ch in 'aeiou':
            new_text += ch
    return new_text
# oracle-call: f('  Hello 42 ')
