t = 5
label = 'none'
if t < 0:
    label = 'neg'
elif t == 0:
    label = 'zero'
print(label)
