x = 2
y = 0
if x:
    y = 1
