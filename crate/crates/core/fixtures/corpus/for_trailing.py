acc = []
for ch in 'abc':
    acc.append(ch.upper())
