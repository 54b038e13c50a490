a = 3
b = 8
if a < b:
    if b - a > 4:
        d = 'far'
    else:
        d = 'near'
else:
    d = 'behind'
print(d)
